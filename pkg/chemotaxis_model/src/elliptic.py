"""
Zero-mean Neumann Poisson solves (the operator K of -Lap K = z, <K> = 0),
the discrete Poincare-Wirtinger constant and the constants of the Liapunov
argument.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, splu

from src.errors import AssumptionViolation, ConfigError, DomainError, IncompatibilityError, NoConvergence
from src.grid import Field, Grid, laplacian_matrix, mean
from src.motility import MotilitySpec, gamma_prime_sup, gamma_star

logger = logging.getLogger(__name__)

POISSON_METHODS = ('cg', 'direct')


@dataclass(eq=False)
class PoissonWorkspace:
    """Solver settings plus cached operators; one workspace per concurrent caller."""
    grid: Grid
    tol: float = 1e-12
    max_iter: int | None = None
    method: str = 'cg'
    warm_start: bool = True

    iterations: int = field(default=0, init=False)
    residual: float = field(default=0.0, init=False)
    _operator: LinearOperator | None = field(default=None, init=False, repr=False)
    _lu: object = field(default=None, init=False, repr=False)
    _last: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError(f"Poisson tolerance must be positive, got {self.tol}")
        if self.max_iter is None:
            self.max_iter = max(1000, 10 * self.grid.size)
        if self.max_iter < 1:
            raise DomainError(f"Poisson max_iter must be >= 1, got {self.max_iter}")
        if self.method not in POISSON_METHODS:
            raise DomainError(f"unknown Poisson method '{self.method}', expected one of {POISSON_METHODS}")

    @property
    def neg_laplacian(self) -> sp.csr_matrix:
        return -laplacian_matrix(self.grid)

    def operator(self) -> LinearOperator:
        """-Lap composed with the projection onto zero-mean fields."""
        if self._operator is None:
            neg_lap = self.neg_laplacian
            n = self.grid.size
            self._operator = LinearOperator(
                (n, n), matvec=lambda x: neg_lap @ (x - x.mean()), dtype=float
            )
        return self._operator

    def _solve_cg(self, b: np.ndarray) -> np.ndarray:
        count = 0

        def _count(_):
            nonlocal count
            count += 1

        x0 = self._last if (self.warm_start and self._last is not None) else None
        x, info = cg(self.operator(), b, x0=x0, rtol=self.tol, atol=0.0,
                     maxiter=self.max_iter, callback=_count)
        self.iterations = count
        if info > 0:
            residual = np.linalg.norm(b - self.neg_laplacian @ x) / np.linalg.norm(b)
            raise NoConvergence('poisson cg', float(residual), count)
        return x

    def _solve_direct(self, b: np.ndarray) -> np.ndarray:
        # pin the first cell; the dropped equation follows from sum(b) = 0
        if self._lu is None:
            reduced = sp.csc_matrix(self.neg_laplacian[1:, 1:])
            self._lu = splu(reduced)
        x = np.zeros_like(b)
        x[1:] = self._lu.solve(b[1:])
        self.iterations = 1
        return x


def poisson_solve(ws: PoissonWorkspace, z: Field) -> Field:
    """Return K with -Lap_h K = z and mean(K) = 0."""
    b = np.array(z.values)
    linf = float(np.max(np.abs(b)))
    if linf == 0.0:
        ws.iterations = 0
        ws.residual = 0.0
        return Field.zeros(z.grid)

    z_mean = mean(z)
    if abs(z_mean) > 1e-10 * linf:
        raise IncompatibilityError(
            f"Neumann problem needs a zero-mean right-hand side, mean is {z_mean:.3e} (max {linf:.3e})"
        )
    b -= b.mean()

    if ws.method == 'direct':
        x = ws._solve_direct(b)
    else:
        x = ws._solve_cg(b)
    x -= x.mean()

    ws.residual = float(np.linalg.norm(b - ws.neg_laplacian @ x) / np.linalg.norm(b))
    ws._last = x
    return Field(z.grid, x)


def dual_potential(ws: PoissonWorkspace, u: Field, M: float) -> Field:
    """P = K[u - M]."""
    drift = mean(u) - M
    if abs(drift) > 1e-10 * abs(M) + np.finfo(float).tiny:
        raise IncompatibilityError(f"mean(u) - M = {drift:.3e} exceeds 1e-10 M")
    z = u.values - M
    z = z - z.mean()
    return poisson_solve(ws, Field(u.grid, z))


def smallest_eigenvalue(grid: Grid) -> float:
    """Smallest nonzero eigenvalue of -Lap_h on a tensor grid."""
    return min(
        4.0 / h**2 * math.sin(math.pi / (2 * n)) ** 2
        for n, h in zip(grid.cells, grid.spacing)
        if n >= 2
    )


def poincare_constant(grid: Grid) -> float:
    return 1.0 / math.sqrt(smallest_eigenvalue(grid))


@dataclass(frozen=True)
class DerivedConstants:
    M: float
    V: float
    c1: float
    gamma_star: float
    gamma_prime_sup: float
    c2: float
    c4: float
    c5: float
    n3_holds: bool

    def as_dict(self) -> dict:
        return {
            'M': self.M, 'V': self.V, 'c1': self.c1,
            'gammaStar': self.gamma_star, 'gammaPrimeSup': self.gamma_prime_sup,
            'c2': self.c2, 'c4': self.c4, 'c5': self.c5, 'n3_holds': self.n3_holds,
        }


def derive_constants(u_in: Field, v_in: Field, motility: MotilitySpec, strict: bool = True) -> DerivedConstants:
    M = mean(u_in)
    V = float(np.max(np.abs(v_in.values)))
    c1 = poincare_constant(u_in.grid)
    g_star = gamma_star(motility, V)
    g_prime = gamma_prime_sup(motility, V)
    n3_holds = g_star > 0 and M > 0

    if strict:
        if not M > 0:
            raise ConfigError(f"mean of the initial density must be positive, got M = {M:g}")
        if not g_star > 0:
            raise AssumptionViolation(
                f"min of gamma on [0, {V:g}] is {g_star:g}, motility must stay positive in n3-strict mode")

    if g_star > 0:
        c2 = (M * c1 * g_prime) ** 2 / g_star
    else:
        c2 = 0.0
    constants = DerivedConstants(
        M=M, V=V, c1=c1,
        gamma_star=g_star, gamma_prime_sup=g_prime,
        c2=c2,
        c4=2.0 * max(g_star, 0.0) / c1**2,
        c5=2.0 * M * c1 * g_prime,
        n3_holds=n3_holds,
    )
    logger.debug("Derived constants %s", constants)
    return constants
