"""
Semi-implicit time stepping of

    u_t = Lap(u gamma(v)),   v_t = Lap v - u v,   Neumann boundary,

one linear solve per unknown and per step:

    (I - tau Lap diag(gamma(v^k))) u^+ = u^k
    (I - tau Lap + tau diag(u^+))  v^+ = v^k

Both matrices are M-matrices. The columns of the u-matrix sum to one, which
conserves mass exactly; the rows of the v-matrix sum to at least one, which
gives the discrete maximum principle.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import bicgstab, spsolve

from src.elliptic import DerivedConstants, PoissonWorkspace, derive_constants, dual_potential
from src.errors import AssumptionViolation, DomainError, InvariantViolation, NoConvergence
from src.grid import Field, laplacian_matrix, mean
from src.motility import MotilitySpec, gamma_max

logger = logging.getLogger(__name__)

STEP_SOLVERS = ('direct', 'bicgstab')


@dataclass(frozen=True)
class StepConfig:
    tau: float
    linear_tol: float = 1e-12
    max_iter: int = 1000
    solver: str = 'direct'

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"time step must be positive, got {self.tau}")
        if not self.linear_tol > 0:
            raise DomainError(f"linear tolerance must be positive, got {self.linear_tol}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.solver not in STEP_SOLVERS:
            raise DomainError(f"unknown step solver '{self.solver}', expected one of {STEP_SOLVERS}")


@dataclass(frozen=True, eq=False)
class SimState:
    u: Field
    v: Field
    t: float
    constants: DerivedConstants
    motility: MotilitySpec
    workspace: PoissonWorkspace
    potential: Field | None = None

    @property
    def grid(self):
        return self.u.grid

    def dual_potential(self) -> Field:
        """P = K[u - M], cached on the state."""
        if self.potential is None:
            object.__setattr__(self, 'potential', dual_potential(self.workspace, self.u, self.constants.M))
        return self.potential


def make_state(u_in: Field, v_in: Field, motility: MotilitySpec,
               workspace: PoissonWorkspace | None = None, t: float = 0.0) -> SimState:
    if u_in.grid != v_in.grid:
        raise DomainError("u and v live on different grids")
    constants = derive_constants(u_in, v_in, motility, strict=motility.strict)
    state = SimState(
        u=u_in, v=v_in, t=t,
        constants=constants,
        motility=motility,
        workspace=workspace or PoissonWorkspace(u_in.grid),
    )
    check_invariants(state)
    return state


def default_tau(grid, motility: MotilitySpec, V: float) -> float:
    """0.1 h^2 / max gamma on [0, V]."""
    g_max = gamma_max(motility, V)
    h = min(grid.spacing)
    return 0.1 * h**2 / (g_max if g_max > 0 else 1.0)


def _solve(A: sp.spmatrix, rhs: np.ndarray, cfg: StepConfig, name: str) -> np.ndarray:
    if cfg.solver == 'direct':
        x = np.asarray(spsolve(sp.csc_matrix(A), rhs), dtype=float)
        if not np.all(np.isfinite(x)):
            # spsolve returns NaNs for a singular matrix
            raise NoConvergence(f"{name} direct", math.nan, 0)
        return x

    x, info = bicgstab(sp.csr_matrix(A), rhs, x0=rhs.copy(), rtol=cfg.linear_tol,
                       atol=0.0, maxiter=cfg.max_iter)
    if info != 0:
        residual = np.linalg.norm(rhs - A @ x) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
        raise NoConvergence(f"{name} bicgstab", float(residual), cfg.max_iter if info > 0 else 0)
    return x


def motility_on_signal(motility: MotilitySpec, v: Field) -> np.ndarray:
    # v may undershoot zero by rounding
    s = np.clip(v.values, 0.0, motility.s_max)
    gamma = motility.value(s)
    if motility.strict and np.any(gamma <= 0):
        i = int(np.argmin(gamma))
        raise AssumptionViolation(f"gamma(v) = {gamma[i]:g} <= 0 at cell {i} (v = {s[i]:g})")
    return gamma


def u_matrix(state: SimState, tau: float) -> sp.spmatrix:
    gamma = motility_on_signal(state.motility, state.v)
    lap = laplacian_matrix(state.grid)
    return sp.identity(state.grid.size, format='csr') - tau * (lap @ sp.diags(gamma))


def v_matrix(u_new: Field, tau: float) -> sp.spmatrix:
    lap = laplacian_matrix(u_new.grid)
    return sp.identity(u_new.grid.size, format='csr') - tau * lap + tau * sp.diags(u_new.values)


def step_u(state: SimState, cfg: StepConfig) -> Field:
    A = u_matrix(state, cfg.tau)
    return state.u.with_values(_solve(A, np.array(state.u.values), cfg, 'u-step'))


def step_v(state: SimState, u_new: Field, cfg: StepConfig) -> Field:
    if u_new.min() < -1e-12 * max(float(np.max(np.abs(u_new.values))), 1.0):
        raise DomainError(f"v-step needs a nonnegative density, min is {u_new.min():.3e}")
    B = v_matrix(u_new, cfg.tau)
    return state.v.with_values(_solve(B, np.array(state.v.values), cfg, 'v-step'))


def advance(state: SimState, cfg: StepConfig, check: bool = True) -> SimState:
    """One step of the scheme. With check=False the caller runs check_invariants itself."""
    u_new = step_u(state, cfg)
    v_new = step_v(state, u_new, cfg)
    new_state = replace(state, u=u_new, v=v_new, t=state.t + cfg.tau, potential=None)
    if check:
        check_invariants(new_state)
    return new_state


def check_invariants(state: SimState):
    """Raise InvariantViolation naming the first SimState invariant that fails."""
    M = state.constants.M
    V = state.constants.V
    u = state.u.values
    v = state.v.values
    u_linf = float(np.max(np.abs(u)))

    if u.min() < -1e-12 * u_linf:
        raise InvariantViolation('positivity of u', f"min(u) = {u.min():.3e}", state.t)
    if v.min() < -1e-12 * V:
        raise InvariantViolation('positivity of v', f"min(v) = {v.min():.3e}", state.t)
    drift = abs(mean(state.u) - M)
    if drift > 1e-10 * M:
        raise InvariantViolation('mass conservation', f"|mean(u) - M| = {drift:.3e}, M = {M:g}", state.t)
    v_linf = float(np.max(np.abs(v)))
    if v_linf > V + 1e-12 * max(V, 1.0):
        raise InvariantViolation('maximum principle', f"max|v| = {v_linf!r} > V = {V!r}", state.t)
