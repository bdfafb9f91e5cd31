"""
Motility functions gamma(s) and the constants derived from them on [0, V].

Built-in kinds:
    constant:c     gamma = c
    exp:chi        gamma = exp(-chi s)
    rational:k     gamma = (1 + s)^(-k)
    power:k        gamma = s^k          (gamma(0) = 0, free mode only)
    custom:<file>  cubic Hermite interpolation of (s, gamma, gamma') triples
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import minimize_scalar

from src.errors import AssumptionViolation, ConfigError, DomainError

logger = logging.getLogger(__name__)

SCAN_POINTS = 2048
KINDS = ('constant', 'exp', 'rational', 'power', 'custom')


@dataclass(frozen=True, eq=False)
class MotilitySpec:
    kind: str
    param: float = 0.0
    # (s, gamma, gamma') samples for kind == 'custom'
    samples: np.ndarray | None = None
    strict: bool = True
    source: str = ''
    _spline: CubicHermiteSpline | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown motility kind '{self.kind}', expected one of {KINDS}")
        if self.kind == 'constant' and self.param < 0:
            raise ConfigError("constant motility must be nonnegative")
        if self.kind in ('exp', 'rational') and self.param < 0:
            raise ConfigError(f"{self.kind} motility parameter must be nonnegative")
        if self.kind == 'power' and self.param < 1:
            raise ConfigError("power motility needs k >= 1 to stay C^1")
        if self.kind == 'custom':
            samples = np.asarray(self.samples, dtype=float)
            if samples.ndim != 2 or samples.shape[1] != 3 or samples.shape[0] < 2:
                raise ConfigError("custom motility needs at least two (s, gamma, gamma') rows")
            if samples[0, 0] != 0.0 or np.any(np.diff(samples[:, 0]) <= 0):
                raise ConfigError("custom motility samples must start at s = 0 and increase")
            spline = CubicHermiteSpline(samples[:, 0], samples[:, 1], samples[:, 2], extrapolate=False)
            object.__setattr__(self, 'samples', samples)
            object.__setattr__(self, '_spline', spline)

    @property
    def label(self) -> str:
        if self.kind == 'custom':
            return f"custom:{self.source}"
        return f"{self.kind}:{self.param:g}"

    @property
    def s_max(self) -> float:
        """Largest argument the motility is defined for."""
        if self.kind == 'custom':
            return float(self.samples[-1, 0])
        return np.inf

    def _check_range(self, s: np.ndarray):
        if np.any(s < 0):
            raise DomainError(f"motility evaluated at negative signal {float(s.min()):.3e}")
        if np.any(s > self.s_max):
            raise DomainError(
                f"custom motility sampled up to s={self.s_max:g}, asked for {float(s.max()):g}"
            )

    def value(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        self._check_range(s)
        if self.kind == 'constant':
            return np.full_like(s, self.param)
        if self.kind == 'exp':
            return np.exp(-self.param * s)
        if self.kind == 'rational':
            return (1.0 + s) ** (-self.param)
        if self.kind == 'power':
            return s ** self.param
        return self._spline(s)

    def derivative(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        self._check_range(s)
        if self.kind == 'constant':
            return np.zeros_like(s)
        if self.kind == 'exp':
            return -self.param * np.exp(-self.param * s)
        if self.kind == 'rational':
            return -self.param * (1.0 + s) ** (-self.param - 1.0)
        if self.kind == 'power':
            return self.param * s ** (self.param - 1.0)
        return self._spline(s, 1)


def gamma_eval(spec: MotilitySpec, s: float) -> float:
    if s < 0:
        raise DomainError(f"motility evaluated at negative signal {s}")
    value = float(spec.value(s))
    if spec.strict and value <= 0:
        raise AssumptionViolation(f"gamma({s:g}) = {value:g} <= 0, motility must stay positive in n3-strict mode")
    return value


def _scan_extreme(func, V: float, maximize: bool) -> float:
    """Dense scan of func on [0, V] refined by bounded Brent/golden search near the best point."""
    s = np.linspace(0.0, V, SCAN_POINTS)
    values = func(s)
    sign = -1.0 if maximize else 1.0
    i = int(np.argmin(sign * values))
    best = float(values[i])

    lo = s[max(i - 1, 0)]
    hi = s[min(i + 1, SCAN_POINTS - 1)]
    if hi > lo:
        res = minimize_scalar(
            lambda x: sign * float(func(x)),
            bounds=(lo, hi),
            method='bounded',
            options={'xatol': 1e-14 * max(V, 1.0)},
        )
        refined = sign * float(res.fun)
        best = max(best, refined) if maximize else min(best, refined)
    return best


def _check_V(V: float):
    if V < 0:
        raise DomainError(f"V must be nonnegative, got {V}")


def gamma_star(spec: MotilitySpec, V: float) -> float:
    """min of gamma over [0, V]."""
    _check_V(V)
    if V == 0:
        return float(spec.value(0.0))
    return _scan_extreme(spec.value, V, maximize=False)


def gamma_max(spec: MotilitySpec, V: float) -> float:
    """max of gamma over [0, V]; sets the default time step."""
    _check_V(V)
    if V == 0:
        return float(spec.value(0.0))
    return _scan_extreme(spec.value, V, maximize=True)


def gamma_prime_sup(spec: MotilitySpec, V: float) -> float:
    """sup of |gamma'| over [0, V]."""
    _check_V(V)
    if V == 0:
        return abs(float(spec.derivative(0.0)))
    return _scan_extreme(lambda s: np.abs(spec.derivative(s)), V, maximize=True)


def derivative_consistency(spec: MotilitySpec, V: float, delta: float = 1e-5) -> float:
    """Max |central difference of gamma - gamma'| on the scan grid of [0, V]."""
    _check_V(V)
    s = np.linspace(delta, max(V, 2 * delta) - delta, SCAN_POINTS)
    central = (spec.value(s + delta) - spec.value(s - delta)) / (2 * delta)
    return float(np.max(np.abs(central - spec.derivative(s))))


def satisfies_n3(spec: MotilitySpec, V: float) -> bool:
    """gamma > 0 on [0, V], checked by scan."""
    _check_V(V)
    if V > spec.s_max:
        return False
    return gamma_star(spec, V) > 0


def load_custom_samples(path) -> np.ndarray:
    try:
        samples = np.loadtxt(path, comments='#', delimiter=None, ndmin=2)
    except OSError as e:
        raise ConfigError(f"cannot read custom motility file {path}: {e}") from e
    except ValueError as e:
        raise ConfigError(f"malformed custom motility file {path}: {e}") from e
    return samples


def parse_motility(text: str, strict: bool = True, base_dir=None) -> MotilitySpec:
    """Parse `constant:1.0`, `exp:0.5`, `rational:2`, `power:2` or `custom:<file>`."""
    kind, sep, arg = text.strip().partition(':')
    kind = kind.strip().lower()
    arg = arg.strip()
    if not sep or not arg:
        raise ConfigError(f"motility must look like kind:parameter, got '{text}'")

    if kind == 'custom':
        path = Path(arg)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return MotilitySpec('custom', samples=load_custom_samples(path), strict=strict, source=arg)

    try:
        param = float(arg)
    except ValueError as e:
        raise ConfigError(f"motility parameter must be a number, got '{arg}'") from e
    return MotilitySpec(kind, param, strict=strict)
