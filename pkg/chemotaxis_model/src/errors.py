"""Exception hierarchy shared by the simulator, the diagnostics and the CLI.

Every class carries the process exit code the command line maps it to.
"""


class ChemotaxisError(Exception):
    exit_code = 1


class ConfigError(ChemotaxisError):
    exit_code = 2


class DomainError(ChemotaxisError, ValueError):
    """Argument outside the domain of an operation (negative s, bad grid, ...)."""
    exit_code = 2


class InvariantViolation(ChemotaxisError):
    exit_code = 3

    def __init__(self, invariant: str, message: str, t: float | None = None):
        self.invariant = invariant
        self.t = t
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"{invariant} violated{where}: {message}")


class AssumptionViolation(ChemotaxisError):
    """gamma <= 0 somewhere while n3-strict mode requires positive motility."""
    exit_code = 3


class SolverError(ChemotaxisError):
    exit_code = 4


class NoConvergence(SolverError):

    def __init__(self, solver: str, residual: float, iterations: int):
        self.solver = solver
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"{solver} did not converge after {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )


class IncompatibilityError(SolverError):
    """Right-hand side of the Neumann problem does not have zero mean."""


class InsufficientHistory(ChemotaxisError):
    exit_code = 2


class FitError(ChemotaxisError):
    exit_code = 2
