"""
Property suite run by the `verify` command on a scenario's grid and data:
operator properties, the discrete Poincare inequalities on random fields,
agreement with the dense oracles and the invariants of a single step.
"""

import logging
from typing import NamedTuple

import numpy as np

from src.config import ScenarioConfig, build_grid, build_initial_data, build_motility, check_hypotheses
from src.diagnostics import dissipation_defect
from src.elliptic import PoissonWorkspace, dual_potential, poincare_constant, poisson_solve, smallest_eigenvalue
from src.grid import Field, Grid, grad_l2_squared, inner, laplacian_matrix, mean
from src.motility import derivative_consistency
from src.oracles import (
    DENSE_LIMIT, dense_poisson, dense_smallest_eigenvalue, dense_step_u, dense_step_v,
)
from src.stepper import StepConfig, advance, default_tau, make_state, motility_on_signal, step_u, step_v

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-10
ORACLE_TOL = 1e-10
DERIVATIVE_TOL = 1e-6


class CheckResult(NamedTuple):
    name: str
    passed: bool
    value: float  # worst observed quantity
    threshold: float
    detail: str = ''


def _check(name: str, value: float, threshold: float, detail: str = '') -> CheckResult:
    result = CheckResult(name, bool(value <= threshold), float(value), float(threshold), detail)
    logger.debug("%s", result)
    return result


def _rel_max_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b))) / max(float(np.max(np.abs(b))), 1.0)


def check_laplacian(grid: Grid, rng: np.random.Generator, samples: int) -> list[CheckResult]:
    lap = laplacian_matrix(grid)
    scale = float(np.max(np.abs(lap.data)))

    column_sums = float(np.max(np.abs(np.asarray(lap.sum(axis=0))))) / scale
    asymmetry = float(abs(lap - lap.T).max())

    worst_form = -np.inf
    for _ in range(samples):
        z = Field(grid, rng.standard_normal(grid.size))
        # <z, Lap z> <= 0, relative to ||z||^2 times the operator scale
        worst_form = max(worst_form, inner(z, z.with_values(lap @ z.values)) / (scale * inner(z, z)))

    return [
        _check('laplacian conservative', column_sums, 1e-12, 'max |column sum| / max |entry|'),
        _check('laplacian symmetric', asymmetry, 0.0, 'max |L - L^T|'),
        _check('laplacian form sign', worst_form, 1e-14, 'max <z, Lap z> / (|L| ||z||^2)'),
    ]


def check_poincare(grid: Grid, M: float, rng: np.random.Generator, samples: int,
                   ws: PoissonWorkspace) -> list[CheckResult]:
    """Poincare-Wirtinger and ||grad P|| <= c1 ||u - M|| on random fields."""
    c1 = poincare_constant(grid)
    M_ref = M if M > 0 else 1.0
    worst_pw = -np.inf
    worst_dual = -np.inf

    for _ in range(samples):
        z = Field(grid, rng.standard_normal(grid.size))
        dev = z.values - mean(z)
        dev_l2 = np.sqrt(np.dot(dev, dev) * grid.cell_volume)
        worst_pw = max(worst_pw, (dev_l2 - c1 * np.sqrt(grad_l2_squared(z))) / dev_l2)

        u = rng.uniform(0.0, 2.0 * M_ref, grid.size)
        u += M_ref - mean(Field(grid, u))
        P = dual_potential(ws, Field(grid, u), M_ref)
        u_dev = np.sqrt(np.dot(u - M_ref, u - M_ref) * grid.cell_volume)
        worst_dual = max(worst_dual, (np.sqrt(grad_l2_squared(P)) - c1 * u_dev) / (c1 * u_dev))

    return [
        _check('poincare-wirtinger', worst_pw, EXACT_TOL,
               f'max (||z - <z>|| - c1 ||grad z||) / ||z - <z>|| over {samples} fields'),
        _check('dual potential bound', worst_dual, EXACT_TOL,
               f'max (||grad P|| - c1 ||u - M||) / (c1 ||u - M||) over {samples} fields'),
    ]


def check_oracles(cfg: ScenarioConfig, state, step_cfg: StepConfig,
                  rng: np.random.Generator) -> list[CheckResult]:
    """Sparse solves against dense direct solves; only for grids up to DENSE_LIMIT cells."""
    grid = state.grid
    if grid.size > DENSE_LIMIT:
        logger.info("Skipping dense oracles: %d cells > %d", grid.size, DENSE_LIMIT)
        return []

    results = []
    z = rng.standard_normal(grid.size)
    z -= z.mean()
    lam_min = smallest_eigenvalue(grid)
    lam_max = sum(4.0 / h**2 for h in grid.spacing)
    expected = dense_poisson(grid, z)

    direct = poisson_solve(PoissonWorkspace(grid, method='direct'), Field(grid, z)).values
    results.append(_check('poisson direct vs oracle', _rel_max_diff(direct, expected), ORACLE_TOL))

    if cfg.poisson_solver == 'cg':
        # cg stops on the residual, so the error carries the condition number
        ws = PoissonWorkspace(grid, tol=cfg.poisson_tol, method='cg', warm_start=False)
        iterative = poisson_solve(ws, Field(grid, z)).values
        bound = max(ORACLE_TOL, 10.0 * cfg.poisson_tol * lam_max / lam_min)
        results.append(_check('poisson cg vs oracle', _rel_max_diff(iterative, expected), bound,
                              f'{ws.iterations} iterations'))

    gamma = motility_on_signal(state.motility, state.v)
    u_new = step_u(state, step_cfg)
    u_dense = dense_step_u(grid, np.array(state.u.values), gamma, step_cfg.tau)
    results.append(_check('u-step vs oracle', _rel_max_diff(u_new.values, u_dense), ORACLE_TOL))

    v_new = step_v(state, u_new, step_cfg)
    v_dense = dense_step_v(grid, np.array(state.v.values), np.array(u_new.values), step_cfg.tau)
    results.append(_check('v-step vs oracle', _rel_max_diff(v_new.values, v_dense), ORACLE_TOL))

    c1_dense = 1.0 / np.sqrt(dense_smallest_eigenvalue(grid))
    c1 = poincare_constant(grid)
    results.append(_check('poincare constant vs eigensolve', abs(c1 - c1_dense) / c1_dense, ORACLE_TOL))
    return results


def check_one_step(state, step_cfg: StepConfig) -> list[CheckResult]:
    M, V = state.constants.M, state.constants.V
    new = advance(state, step_cfg, check=False)
    u_linf = float(np.max(np.abs(new.u.values)))

    l2_old = inner(state.v, state.v)
    defect = dissipation_defect(state.v, new.v, new.u, step_cfg.tau) / max(l2_old, np.finfo(float).tiny)
    return [
        _check('step positivity u', -new.u.min(), 1e-12 * max(u_linf, 1.0)),
        _check('step positivity v', -new.v.min(), 1e-12 * max(V, 1.0)),
        _check('step mass', abs(mean(new.u) - M), 1e-10 * max(M, np.finfo(float).tiny)),
        _check('step maximum principle', float(np.max(np.abs(new.v.values))) - V, 1e-12 * max(V, 1.0)),
        _check('step dissipation', defect, 1e-10, 'relative to ||v^k||^2'),
    ]


def verify(cfg: ScenarioConfig, samples: int = 1000) -> list[CheckResult]:
    """Run the property suite for one scenario; each entry says pass or fail with its worst value."""
    grid = build_grid(cfg)
    motility = build_motility(cfg)
    u_in, v_in = build_initial_data(cfg, grid)
    check_hypotheses(cfg, u_in, v_in, motility)
    rng = np.random.default_rng(cfg.seed)

    ws = PoissonWorkspace(grid, tol=cfg.poisson_tol, method=cfg.poisson_solver)
    state = make_state(u_in, v_in, motility, ws)
    tau = cfg.tau if cfg.tau is not None else default_tau(grid, motility, state.constants.V)
    step_cfg = StepConfig(tau, cfg.linear_tol, cfg.max_iter, cfg.step_solver)
    logger.info("Verifying %s on %s cells with %d samples", cfg.name, grid.cells, samples)

    V = state.constants.V
    results = check_laplacian(grid, rng, samples)
    results += check_poincare(grid, state.constants.M, rng, samples, ws)
    results.append(_check('motility derivative', derivative_consistency(motility, V), DERIVATIVE_TOL,
                          'max |central difference - derivative| on [0, V]'))
    results += check_oracles(cfg, state, step_cfg, rng)
    results += check_one_step(state, step_cfg)

    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning("Failed checks: %s", ', '.join(failed))
    return results
