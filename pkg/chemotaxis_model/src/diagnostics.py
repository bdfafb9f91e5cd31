"""
Norms, identities and inequalities of the Liapunov argument evaluated along
simulated trajectories.

Single snapshots produce a DiagnosticsRecord; whole trajectories are handled
as pandas DataFrames whose columns are the CSV field names (RECORD_COLUMNS).
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, trapezoid

from src.elliptic import DerivedConstants, PoissonWorkspace, dual_potential
from src.errors import DomainError, InsufficientHistory
from src.grid import Field, grad_l2_squared, mean, norms
from src.motility import MotilitySpec
from src.stepper import SimState, motility_on_signal

logger = logging.getLogger(__name__)


@dataclass
class DiagnosticsRecord:
    t: float
    mass_mean: float
    v_linf: float
    v_l1: float
    v_l2: float
    v_grad_l2: float
    v_h1: float
    v_h2: float
    u_dev_l2: float
    grad_p_l2: float
    liapunov: float
    energy_identity_residual: float = 0.0
    duality_identity_residual: float = 0.0
    liapunov_decay_slack: float = 0.0
    gradient_decay_slack: float = 0.0
    g1_slack: float = 0.0
    g3_slack: float = 0.0
    grad_p_bound_slack: float = 0.0
    u_l2: float = 0.0
    u_min: float = 0.0
    v_min: float = 0.0
    v_lap_l2: float = 0.0
    dissipation_defect: float = 0.0
    grad_p_gronwall_slack: float = 0.0

    def to_row(self) -> dict:
        return {column: value for column, value in zip(RECORD_COLUMNS, asdict(self).values())}


# CSV header, in DiagnosticsRecord field order
RECORD_COLUMNS = [
    't', 'massMean', 'vLinf', 'vL1', 'vL2', 'vGradL2', 'vH1', 'vH2',
    'uMinusM_L2', 'gradP_L2', 'liapunov',
    'energyIdentityResidual', 'dualityIdentityResidual',
    'prop6Slack', 'lemma7Slack', 'g1Slack', 'g3Slack', 'gradPBoundSlack',
    'uL2', 'uMin', 'vMin', 'vLapL2', 'dissipationDefect', 'gradPGronwallSlack',
]


class WindowIntegrals(NamedTuple):
    t_start: float
    u_dev_integral: float
    v_h2_integral: float
    v_linf_integral: float


def _deviation_l2(u: Field, M: float) -> float:
    dev = u.values - M
    return math.sqrt(float(np.dot(dev, dev)) * u.grid.cell_volume)


def record(state: SimState, P: Field | None = None) -> DiagnosticsRecord:
    """Norms, Liapunov value and the Poincare check for the current state."""
    constants = state.constants
    if P is None:
        P = state.dual_potential()

    v_norms = norms(state.v)
    u_norms = norms(state.u)
    u_dev = _deviation_l2(state.u, constants.M)
    grad_p = math.sqrt(grad_l2_squared(P))

    rec = DiagnosticsRecord(
        t=state.t,
        mass_mean=mean(state.u),
        v_linf=v_norms.linf,
        v_l1=v_norms.l1,
        v_l2=v_norms.l2,
        v_grad_l2=v_norms.grad_l2,
        v_h1=v_norms.h1,
        v_h2=v_norms.h2,
        u_dev_l2=u_dev,
        grad_p_l2=grad_p,
        liapunov=grad_p**2 + constants.c2 * v_norms.l2**2,
        u_l2=u_norms.l2,
        u_min=state.u.min(),
        v_min=state.v.min(),
        v_lap_l2=v_norms.lap_l2,
    )
    rec.grad_p_bound_slack = gradP_poincare_check(rec, constants)
    return rec


def energy_identity_residual(v_old: Field, v_new: Field, u_new: Field, tau: float) -> float:
    """|d/dt ||v||^2 + 2 ||grad v||^2 + 2 ||v sqrt(u)||^2| for one backward-Euler step."""
    vol = v_new.grid.cell_volume
    l2_new = float(np.dot(v_new.values, v_new.values)) * vol
    l2_old = float(np.dot(v_old.values, v_old.values)) * vol
    absorption = float(np.dot(u_new.values, v_new.values**2)) * vol
    return abs((l2_new - l2_old) / tau + 2.0 * grad_l2_squared(v_new) + 2.0 * absorption)


def dissipation_defect(v_old: Field, v_new: Field, u_new: Field, tau: float) -> float:
    """||v+||^2 + 2 tau ||grad v+||^2 + 2 tau sum u+ (v+)^2 - ||v^k||^2; nonpositive for the implicit step."""
    vol = v_new.grid.cell_volume
    l2_new = float(np.dot(v_new.values, v_new.values)) * vol
    l2_old = float(np.dot(v_old.values, v_old.values)) * vol
    absorption = float(np.dot(u_new.values, v_new.values**2)) * vol
    return l2_new + 2.0 * tau * grad_l2_squared(v_new) + 2.0 * tau * absorption - l2_old


def duality_identity_residual(u_old: Field, u_new: Field, v_old: Field, M: float, tau: float,
                              ws: PoissonWorkspace, motility: MotilitySpec,
                              P_old: Field | None = None, P_new: Field | None = None) -> float:
    """Residual of d/dt ||grad P||^2 = -2 int gamma(v)(u-M)^2 - 2M int gamma(v)(u-M) over one u-step."""
    if P_old is None:
        P_old = dual_potential(ws, u_old, M)
    if P_new is None:
        P_new = dual_potential(ws, u_new, M)

    vol = u_new.grid.cell_volume
    gamma = motility_on_signal(motility, v_old)
    dev = u_new.values - M
    quadratic = float(np.dot(gamma, dev**2)) * vol
    linear = float(np.dot(gamma, dev)) * vol
    rate = (grad_l2_squared(P_new) - grad_l2_squared(P_old)) / tau
    return abs(rate + 2.0 * quadratic + 2.0 * M * linear)


def _interval(prev: DiagnosticsRecord, curr: DiagnosticsRecord) -> float:
    delta = curr.t - prev.t
    if not delta > 0:
        raise DomainError(f"records must be in increasing time order, got {prev.t} then {curr.t}")
    return delta


def liapunov_decay_slack(prev: DiagnosticsRecord, curr: DiagnosticsRecord, constants: DerivedConstants) -> float:
    """dL/dt + gamma_* ||u-M||^2 + c2 ||grad v||^2 at the later record; <= 0 in the continuum."""
    delta = _interval(prev, curr)
    return ((curr.liapunov - prev.liapunov) / delta
            + constants.gamma_star * curr.u_dev_l2**2
            + constants.c2 * curr.v_grad_l2**2)


def gradient_decay_slack(prev: DiagnosticsRecord, curr: DiagnosticsRecord, constants: DerivedConstants) -> float:
    """d/dt ||grad v||^2 + 2M ||grad v||^2 + ||Lap v||^2 - V^2 ||u-M||^2."""
    delta = _interval(prev, curr)
    return ((curr.v_grad_l2**2 - prev.v_grad_l2**2) / delta
            + 2.0 * constants.M * curr.v_grad_l2**2
            + curr.v_lap_l2**2
            - constants.V**2 * curr.u_dev_l2**2)


def gradP_poincare_check(rec: DiagnosticsRecord, constants: DerivedConstants) -> float:
    """||grad P|| - c1 ||u - M||; nonpositive up to solver tolerance."""
    return rec.grad_p_l2 - constants.c1 * rec.u_dev_l2


def records_to_frame(records) -> pd.DataFrame:
    return pd.DataFrame([rec.to_row() for rec in records], columns=RECORD_COLUMNS)


def write_history_csv(history: pd.DataFrame, path):
    history.to_csv(path, index=False, float_format='%.17g')


def read_history_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision='round_trip')


def _output_times(history: pd.DataFrame) -> np.ndarray:
    if len(history) == 0:
        raise InsufficientHistory("trajectory has no records")
    t = history['t'].to_numpy(dtype=float)
    if np.any(np.diff(t) <= 0):
        raise InsufficientHistory("trajectory times must increase strictly")
    return t


def _discounted_integral(f: np.ndarray, t: np.ndarray, alpha: float) -> np.ndarray:
    """I_k = int_{t_0}^{t_k} exp(alpha (s - t_k)) f(s) ds by trapezoids, computed recursively."""
    # the last output interval may be shorter than the cadence
    out = np.zeros_like(f)
    for k in range(1, len(f)):
        delta = t[k] - t[k - 1]
        decay = math.exp(-alpha * delta)
        out[k] = decay * out[k - 1] + 0.5 * delta * (decay * f[k - 1] + f[k])
    return out


def gronwall_bounds(history: pd.DataFrame, constants: DerivedConstants) -> pd.DataFrame:
    """
    Signed slacks (left minus right side) of the three integrated decay bounds
    on ||grad v||^2, ||v||_1 and ||grad P||^2 at every stored time.

    Returns a DataFrame with columns t, g1Slack, g3Slack, gradPGronwallSlack.
    """
    t = _output_times(history)
    elapsed = t - t[0]
    M, V = constants.M, constants.V

    u_dev = history['uMinusM_L2'].to_numpy(dtype=float)
    v_grad = history['vGradL2'].to_numpy(dtype=float)
    v_l1 = history['vL1'].to_numpy(dtype=float)
    grad_p = history['gradP_L2'].to_numpy(dtype=float)
    cross = u_dev * v_grad

    g1_rhs = v_grad[0]**2 * np.exp(-2.0 * M * elapsed) + V**2 * _discounted_integral(u_dev**2, t, 2.0 * M)
    g3_rhs = v_l1[0] * np.exp(-M * elapsed) + constants.c1 * _discounted_integral(cross, t, M)
    gp_rhs = (grad_p[0]**2 * np.exp(-constants.c4 * elapsed)
              + constants.c5 * _discounted_integral(cross, t, constants.c4))

    return pd.DataFrame({
        't': t,
        'g1Slack': v_grad**2 - g1_rhs,
        'g3Slack': v_l1 - g3_rhs,
        'gradPGronwallSlack': grad_p**2 - gp_rhs,
    })


def window_integrals(history: pd.DataFrame, t: float) -> WindowIntegrals:
    """Trapezoidal integrals of ||u-M||^2, ||v||_H2^2 and ||v||_inf^2 over [t, t+1]."""
    times = history['t'].to_numpy(dtype=float)
    if len(times) < 2:
        raise InsufficientHistory("window integrals need at least two records")
    slack = 1e-9 * max(1.0, abs(t))
    if t < times[0] - slack or t + 1.0 > times[-1] + slack:
        raise InsufficientHistory(
            f"trajectory covers [{times[0]:g}, {times[-1]:g}], window is [{t:g}, {t + 1:g}]"
        )

    inside = times[(times > t) & (times < t + 1.0)]
    nodes = np.concatenate([[t], inside, [t + 1.0]])

    def integrate(column):
        values = history[column].to_numpy(dtype=float) ** 2
        return float(trapezoid(np.interp(nodes, times, values), nodes))

    return WindowIntegrals(
        t_start=t,
        u_dev_integral=integrate('uMinusM_L2'),
        v_h2_integral=integrate('vH2'),
        v_linf_integral=integrate('vLinf'),
    )


def window_sequence(history: pd.DataFrame) -> list[WindowIntegrals]:
    """Window integrals over successive unit windows starting at the first record."""
    times = history['t'].to_numpy(dtype=float)
    if len(times) < 2:
        return []
    n_windows = int(math.floor(times[-1] - times[0] + 1e-9))
    return [window_integrals(history, times[0] + k) for k in range(n_windows)]


def linf_monotonicity_check(history, tol: float = 1e-12) -> bool:
    """True when ||v||_inf never increases along the stored outputs."""
    if isinstance(history, pd.DataFrame):
        values = history['vLinf'].to_numpy(dtype=float)
    else:
        values = np.asarray(history, dtype=float)
    if len(values) < 2:
        return True
    return bool(np.all(np.diff(values) <= tol * max(float(values[0]), 1.0)))


def liapunov_increase(history: pd.DataFrame) -> float:
    """Largest step-to-step increase of L (<= 0 means monotone)."""
    values = history['liapunov'].to_numpy(dtype=float)
    if len(values) < 2:
        return 0.0
    return float(np.max(np.diff(values)))


def liapunov_monotone(history: pd.DataFrame, rel: float = 1e-8) -> bool:
    if len(history) == 0:
        return True
    eps = rel * max(float(history['liapunov'].iloc[0]), 1.0)
    return liapunov_increase(history) <= eps


def dissipation_integral(history: pd.DataFrame) -> np.ndarray:
    """Running integral of ||u-M||^2 + ||grad v||^2 + ||Lap v||^2 from the first record."""
    t = history['t'].to_numpy(dtype=float)
    integrand = (history['uMinusM_L2'].to_numpy(dtype=float) ** 2
                 + history['vGradL2'].to_numpy(dtype=float) ** 2
                 + history['vLapL2'].to_numpy(dtype=float) ** 2)
    if len(t) < 2:
        return np.zeros(len(t))
    return cumulative_trapezoid(integrand, t, initial=0.0)
