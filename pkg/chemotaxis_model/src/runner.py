"""
Scenario orchestration: run one configuration to t_end writing diagnostics,
snapshots and a summary, or run a list of configurations as a sweep.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from src.config import (
    RNG_NAME, ScenarioConfig, build_grid, build_initial_data, build_motility,
    check_hypotheses, load_scenario,
)
from src.diagnostics import (
    dissipation_defect, dissipation_integral, duality_identity_residual, energy_identity_residual,
    gradient_decay_slack, gronwall_bounds, liapunov_decay_slack, liapunov_increase, liapunov_monotone,
    linf_monotonicity_check, record, records_to_frame, window_sequence, write_history_csv,
)
from src.elliptic import PoissonWorkspace, dual_potential
from src.errors import ChemotaxisError, FitError, InsufficientHistory, InvariantViolation
from src.grid import write_snapshot
from src.rates import fit_rate, tail_window
from src.stepper import SimState, StepConfig, advance, check_invariants, default_tau, make_state

logger = logging.getLogger(__name__)


@dataclass
class RunSummary:
    name: str
    status: str = 'ok'
    message: str = ''
    mode: str = ''
    n3_holds: bool = False
    gamma: str = ''
    cells: str = ''
    seed: int = 0
    rng: str = RNG_NAME
    tau: float = math.nan
    t_end: float = math.nan
    steps: int = 0
    outputs: int = 0
    M: float = math.nan
    V: float = math.nan
    c1: float = math.nan
    gamma_star: float = math.nan
    gamma_prime_sup: float = math.nan
    c2: float = math.nan
    c4: float = math.nan
    c5: float = math.nan
    final_u_dev_l2: float = math.nan
    final_v_h1: float = math.nan
    final_v_linf: float = math.nan
    final_liapunov: float = math.nan
    liapunov_monotone: bool = False
    liapunov_max_increase: float = math.nan
    linf_monotone: bool = False
    max_mass_drift: float = math.nan
    max_dissipation_defect: float = math.nan
    dissipation_ok: bool = False
    max_energy_residual: float = math.nan
    max_duality_residual: float = math.nan
    max_liapunov_decay_slack: float = math.nan
    max_gradient_decay_slack: float = math.nan
    max_g1_slack: float = math.nan
    max_g3_slack: float = math.nan
    max_gradp_bound_slack: float = math.nan
    max_gradp_gronwall_slack: float = math.nan
    first_window_u_dev: float = math.nan
    last_window_u_dev: float = math.nan
    dissipation_integral: float = math.nan
    vl1_rate: float = math.nan
    vl1_rate_goodness: float = math.nan

    def to_row(self) -> dict:
        return asdict(self)


SUMMARY_COLUMNS = list(RunSummary.__dataclass_fields__)


@dataclass
class RunResult:
    summary: RunSummary
    history: pd.DataFrame
    out_dir: Path | None = None
    snapshots: list[Path] = field(default_factory=list)


def _snapshot(out_dir: Path | None, state: SimState, prefix: str = 't') -> list[Path]:
    if out_dir is None:
        return []
    paths = []
    for name, z in (('u', state.u), ('v', state.v)):
        path = out_dir / 'snapshots' / name / f"{prefix}_{state.t:.6f}.field"
        write_snapshot(path, z, state.t)
        paths.append(path)
    return paths


def _finish_history(history: pd.DataFrame, constants) -> pd.DataFrame:
    bounds = gronwall_bounds(history, constants)
    history = history.copy()
    for column in ('g1Slack', 'g3Slack', 'gradPGronwallSlack'):
        history[column] = bounds[column].to_numpy()
    return history


def _summarize(cfg: ScenarioConfig, state: SimState, history: pd.DataFrame, tau: float,
               steps: int, n3_holds: bool, max_defect: float) -> RunSummary:
    c = state.constants
    last = history.iloc[-1]
    windows = window_sequence(history)

    try:
        rate = fit_rate(history, 'vL1', tail_window(history))
        vl1_rate, goodness = rate.rate, rate.goodness
    except (FitError, InsufficientHistory) as e:
        logger.debug("No vL1 rate for %s: %s", cfg.name, e)
        vl1_rate, goodness = math.nan, math.nan

    mass_drift = (history['massMean'] - c.M).abs().max() / c.M if c.M > 0 else 0.0
    return RunSummary(
        name=cfg.name,
        mode=cfg.mode,
        n3_holds=n3_holds,
        gamma=state.motility.label,
        cells='x'.join(str(n) for n in cfg.cells),
        seed=cfg.seed,
        tau=tau,
        t_end=state.t,
        steps=steps,
        outputs=len(history),
        M=c.M, V=c.V, c1=c.c1,
        gamma_star=c.gamma_star, gamma_prime_sup=c.gamma_prime_sup,
        c2=c.c2, c4=c.c4, c5=c.c5,
        final_u_dev_l2=float(last['uMinusM_L2']),
        final_v_h1=float(last['vH1']),
        final_v_linf=float(last['vLinf']),
        final_liapunov=float(last['liapunov']),
        liapunov_monotone=liapunov_monotone(history, cfg.liapunov_rel),
        liapunov_max_increase=liapunov_increase(history),
        linf_monotone=linf_monotonicity_check(history),
        max_mass_drift=float(mass_drift),
        max_dissipation_defect=max_defect,
        dissipation_ok=max_defect <= cfg.dissipation_rel,
        max_energy_residual=float(history['energyIdentityResidual'].max()),
        max_duality_residual=float(history['dualityIdentityResidual'].max()),
        max_liapunov_decay_slack=float(history['prop6Slack'].max()),
        max_gradient_decay_slack=float(history['lemma7Slack'].max()),
        max_g1_slack=float(history['g1Slack'].max()),
        max_g3_slack=float(history['g3Slack'].max()),
        max_gradp_bound_slack=float(history['gradPBoundSlack'].max()),
        max_gradp_gronwall_slack=float(history['gradPGronwallSlack'].max()),
        first_window_u_dev=windows[0].u_dev_integral if windows else math.nan,
        last_window_u_dev=windows[-1].u_dev_integral if windows else math.nan,
        dissipation_integral=float(dissipation_integral(history)[-1]),
        vl1_rate=vl1_rate,
        vl1_rate_goodness=goodness,
    )


def write_summary(summary: RunSummary, path):
    with open(path, 'w', encoding='utf-8') as f:
        for key, value in summary.to_row().items():
            if isinstance(value, float):
                value = f"{value:.17g}"
            f.write(f"{key} = {value}\n")


def run_scenario(cfg: ScenarioConfig, out_dir=None, plot: bool = False) -> RunResult:
    """
    Advance the scenario to t_end, recording diagnostics every `cadence` steps.

    Writes diagnostics.csv, snapshots/{u,v}/t_<time>.field and summary.txt
    under out_dir when it is given. An invariant violation dumps the
    offending state and the diagnostics so far before re-raising.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    grid = build_grid(cfg)
    motility = build_motility(cfg)
    u_in, v_in = build_initial_data(cfg, grid)
    n3_holds = check_hypotheses(cfg, u_in, v_in, motility)
    if not n3_holds:
        logger.warning("Scenario %s runs with motility vanishing on [0, V]", cfg.name)

    ws = PoissonWorkspace(grid, tol=cfg.poisson_tol, method=cfg.poisson_solver)
    state = make_state(u_in, v_in, motility, ws)
    constants = state.constants

    tau = cfg.tau if cfg.tau is not None else default_tau(grid, motility, constants.V)
    step_cfg = StepConfig(tau, cfg.linear_tol, cfg.max_iter, cfg.step_solver)
    n_steps = max(1, math.ceil(cfg.t_end / tau - 1e-9))
    logger.info("Running %s: %s cells, gamma=%s, tau=%.3g, %d steps",
                cfg.name, 'x'.join(map(str, grid.cells)), motility.label, tau, n_steps)

    snapshots = _snapshot(out_dir, state)
    records = [record(state)]
    max_defect = -math.inf

    for k in range(1, n_steps + 1):
        # the last step is shortened to land on t_end
        step_tau = tau if k < n_steps else cfg.t_end - (n_steps - 1) * tau
        prev = state
        state = advance(prev, step_cfg if step_tau == tau else replace(step_cfg, tau=step_tau), check=False)
        try:
            check_invariants(state)
        except InvariantViolation:
            _snapshot(out_dir, state, prefix='violation_t')
            if out_dir is not None:
                write_history_csv(records_to_frame(records), out_dir / 'diagnostics.csv')
            raise

        l2_old = float(np.dot(prev.v.values, prev.v.values)) * grid.cell_volume
        defect = dissipation_defect(prev.v, state.v, state.u, step_tau) / max(l2_old, np.finfo(float).tiny)
        max_defect = max(max_defect, defect)

        if k % cfg.cadence == 0 or k == n_steps:
            P_old = dual_potential(ws, prev.u, constants.M)
            P_new = state.dual_potential()
            rec = record(state, P_new)
            rec.energy_identity_residual = energy_identity_residual(prev.v, state.v, state.u, step_tau)
            rec.duality_identity_residual = duality_identity_residual(
                prev.u, state.u, prev.v, constants.M, step_tau, ws, motility, P_old, P_new)
            rec.liapunov_decay_slack = liapunov_decay_slack(records[-1], rec, constants)
            rec.gradient_decay_slack = gradient_decay_slack(records[-1], rec, constants)
            rec.dissipation_defect = defect
            records.append(rec)
            logger.debug("t=%.4f L=%.6e |u-M|=%.3e |v|_H1=%.3e", state.t, rec.liapunov,
                         rec.u_dev_l2, rec.v_h1)

            outputs = len(records) - 1
            if cfg.snapshot_every and outputs % cfg.snapshot_every == 0 and k != n_steps:
                snapshots += _snapshot(out_dir, state)

    snapshots += _snapshot(out_dir, state)
    history = _finish_history(records_to_frame(records), constants)
    summary = _summarize(cfg, state, history, tau, n_steps, n3_holds, max_defect)

    if out_dir is not None:
        write_history_csv(history, out_dir / 'diagnostics.csv')
        write_summary(summary, out_dir / 'summary.txt')
        if plot:
            from src.plotting import plot_profiles, plot_trajectory
            plot_trajectory(history, out_dir / 'trajectory.png', title=cfg.name)
            if grid.dim == 1:
                plot_profiles(state.u.values, state.v.values, grid.centers(0), out_dir / 'profiles.png', state.t)

    logger.info("Finished %s at t=%.4g: |u-M|=%.3e, |v|_H1=%.3e, Liapunov monotone=%s",
                cfg.name, state.t, summary.final_u_dev_l2, summary.final_v_h1, summary.liapunov_monotone)
    return RunResult(summary, history, out_dir, snapshots)


def _failed_summary(name: str, error: Exception) -> RunSummary:
    return RunSummary(name=name, status=type(error).__name__, message=str(error))


def _run_one(job) -> tuple[RunSummary, pd.DataFrame | None]:
    item, out_dir = job
    name = item.name if isinstance(item, ScenarioConfig) else Path(item).stem
    try:
        cfg = item if isinstance(item, ScenarioConfig) else load_scenario(item)
        result = run_scenario(cfg, out_dir)
        return result.summary, result.history
    except ChemotaxisError as e:
        logger.error("Run %s failed: %s", name, e)
        return _failed_summary(name, e), None


def sweep(configs: list, out_dir=None, workers: int = 1, db_path=None) -> pd.DataFrame:
    """
    Run scenarios independently and aggregate their summaries into one table.

    Items may be ScenarioConfig objects or scenario file paths. A failing run
    becomes a row with its error class in `status`; the sweep continues.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    jobs = []
    for i, item in enumerate(configs):
        name = item.name if isinstance(item, ScenarioConfig) else Path(item).stem
        jobs.append((item, out_dir / f"{i:03d}_{name}" if out_dir is not None else None))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]

    table = pd.DataFrame([summary.to_row() for summary, _ in results], columns=SUMMARY_COLUMNS)
    failed = int((table['status'] != 'ok').sum())
    logger.info("Sweep finished: %d runs, %d failed", len(table), failed)

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        table.to_csv(out_dir / 'sweep_summary.csv', index=False, float_format='%.17g')
    if db_path is not None:
        from src.results_db import init_db, save_sweep
        engine, session = init_db(db_path)
        try:
            save_sweep(session, table, [history for _, history in results])
        finally:
            session.close()
            engine.dispose()
    return table
