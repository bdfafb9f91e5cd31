"""
Scenario configuration files and the initial data they describe.

One scenario per INI-style file:

    [scenario]
    name = default

    [grid]
    dim = 1
    lengths = 1.0
    cells = 128

    [motility]
    gamma = exp:1

    [initial]
    u = perturbed:1.0,0.5
    v = constant:1.0

    [run]
    tau = 1e-4
    t_end = 20
    cadence = 10
    mode = n3-strict
    seed = 20240501
"""

import configparser
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from src.errors import ChemotaxisError, ConfigError
from src.grid import Field, Grid, mean
from src.motility import MotilitySpec, derivative_consistency, parse_motility, satisfies_n3

logger = logging.getLogger(__name__)

MODES = ('n3-strict', 'free')
RNG_NAME = 'numpy.random.PCG64'

ALLOWED_KEYS = {
    'scenario': {'name'},
    'grid': {'dim', 'lengths', 'cells'},
    'motility': {'gamma'},
    'initial': {'u', 'v'},
    'run': {'tau', 't_end', 'cadence', 'mode', 'seed', 'snapshot_every'},
    'solver': {'linear_tol', 'poisson_tol', 'max_iter', 'step_solver', 'poisson_solver'},
    'thresholds': {'liapunov_rel', 'dissipation_rel'},
}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    lengths: tuple[float, ...]
    cells: tuple[int, ...]
    gamma: str
    u_init: str
    v_init: str
    t_end: float
    tau: float | None = None
    cadence: int = 10
    mode: str = 'n3-strict'
    seed: int = 0
    snapshot_every: int = 0
    linear_tol: float = 1e-12
    poisson_tol: float = 1e-12
    max_iter: int = 1000
    step_solver: str = 'direct'
    poisson_solver: str = 'cg'
    liapunov_rel: float = 1e-8
    dissipation_rel: float = 1e-10
    base_dir: Path = Path('.')

    @property
    def strict(self) -> bool:
        return self.mode == 'n3-strict'

    @property
    def dim(self) -> int:
        return len(self.cells)

    def validate(self):
        if len(self.lengths) != len(self.cells) or len(self.cells) not in (1, 2):
            raise ConfigError(f"grid needs 1 or 2 axes, got lengths={self.lengths} cells={self.cells}")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.cadence < 1:
            raise ConfigError(f"cadence must be >= 1, got {self.cadence}")
        if self.tau is not None and not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{self.mode}'")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        if self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed}")
        return self

    def with_overrides(self, tau: float | None = None, cadence: int | None = None) -> 'ScenarioConfig':
        changes = {}
        if tau is not None:
            changes['tau'] = tau
        if cadence is not None:
            changes['cadence'] = cadence
        return replace(self, **changes).validate()


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(',') if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(',') if x.strip())


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=('#',), interpolation=None)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            parser.read_file(f)
    except OSError as e:
        raise ConfigError(f"cannot read scenario file {path}: {e}") from e
    except configparser.Error as e:
        raise ConfigError(f"malformed scenario file {path}: {e}") from e

    for section in parser.sections():
        if section not in ALLOWED_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        unknown = set(parser[section]) - ALLOWED_KEYS[section]
        if unknown:
            raise ConfigError(f"{path}: unknown keys in [{section}]: {sorted(unknown)}")

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        if default is None:
            raise ConfigError(f"{path}: missing [{section}] {key}")
        return default

    try:
        lengths = _floats(get('grid', 'lengths'))
        cells = _ints(get('grid', 'cells'))
        dim = int(get('grid', 'dim', str(len(cells))))
        tau_text = get('run', 'tau', '')
        cfg = ScenarioConfig(
            name=get('scenario', 'name', path.stem),
            lengths=lengths,
            cells=cells,
            gamma=get('motility', 'gamma'),
            u_init=get('initial', 'u'),
            v_init=get('initial', 'v'),
            t_end=float(get('run', 't_end')),
            tau=float(tau_text) if tau_text else None,
            cadence=int(get('run', 'cadence', '10')),
            mode=get('run', 'mode', 'n3-strict'),
            seed=int(get('run', 'seed', '0')),
            snapshot_every=int(get('run', 'snapshot_every', '0')),
            linear_tol=float(get('solver', 'linear_tol', '1e-12')),
            poisson_tol=float(get('solver', 'poisson_tol', '1e-12')),
            max_iter=int(get('solver', 'max_iter', '1000')),
            step_solver=get('solver', 'step_solver', 'direct'),
            poisson_solver=get('solver', 'poisson_solver', 'cg'),
            liapunov_rel=float(get('thresholds', 'liapunov_rel', '1e-8')),
            dissipation_rel=float(get('thresholds', 'dissipation_rel', '1e-10')),
            base_dir=path.parent,
        )
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e

    if dim != len(cells):
        raise ConfigError(f"{path}: dim = {dim} but {len(cells)} cell counts given")
    return cfg.validate()


def load_sweep_list(path) -> list[Path]:
    """Scenario paths listed one per line, relative to the list file."""
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read sweep list {path}: {e}") from e

    scenarios = []
    for line in lines:
        line = line.split('#', 1)[0].strip()
        if line:
            scenarios.append(path.parent / line)
    return scenarios


def build_grid(cfg: ScenarioConfig) -> Grid:
    try:
        return Grid(cfg.lengths, cfg.cells)
    except ChemotaxisError as e:
        raise ConfigError(str(e)) from e


def build_motility(cfg: ScenarioConfig) -> MotilitySpec:
    return parse_motility(cfg.gamma, strict=cfg.strict, base_dir=cfg.base_dir)


def _split_spec(text: str) -> tuple[str, list[str]]:
    kind, sep, args = text.strip().partition(':')
    if not sep:
        raise ConfigError(f"initial data must look like kind:arguments, got '{text}'")
    return kind.strip().lower(), [a.strip() for a in args.split(',') if a.strip()]


def _gaussian_profile(grid: Grid, width: float, center: str) -> np.ndarray:
    coords = [float(c) for c in center.split(';')]
    if len(coords) > grid.dim:
        raise ConfigError(f"gaussian center '{center}' has {len(coords)} coordinates on a {grid.dim}D grid")
    coords += [grid.lengths[k] / 2 for k in range(len(coords), grid.dim)]
    dist_sq = sum((x - c) ** 2 for x, c in zip(grid.mesh(), coords))
    return np.exp(-dist_sq / (2.0 * width**2)).reshape(-1)


def initial_field(text: str, grid: Grid, rng: np.random.Generator, which: str) -> Field:
    """Build u^in or v^in from its spec string."""
    kind, args = _split_spec(text)
    try:
        if kind == 'constant' and len(args) == 1:
            return Field.constant(grid, float(args[0]))

        if kind == 'perturbed' and len(args) == 2 and which == 'u':
            level, amplitude = float(args[0]), float(args[1])
            if not 0 <= amplitude <= 1:
                raise ConfigError(f"perturbation amplitude must lie in [0, 1], got {amplitude}")
            xi = rng.uniform(-1.0, 1.0, grid.size)
            xi -= xi.mean()
            xi /= np.max(np.abs(xi))
            return Field(grid, level * (1.0 + amplitude * xi))

        if kind == 'cosine' and len(args) in (2, 3):
            level, amplitude = float(args[0]), float(args[1])
            mode = int(args[2]) if len(args) == 3 else 1
            x = grid.mesh()[0].reshape(-1)
            return Field(grid, level + amplitude * np.cos(mode * np.pi * x / grid.lengths[0]))

        if kind == 'gaussian' and len(args) == 3:
            scale, width = float(args[0]), float(args[1])
            if not width > 0:
                raise ConfigError(f"gaussian width must be positive, got {width}")
            profile = _gaussian_profile(grid, width, args[2])
            if which == 'u':
                # scale is the total mass
                return Field(grid, scale * profile / (profile.sum() * grid.cell_volume))
            return Field(grid, scale * profile)
    except ValueError as e:
        raise ConfigError(f"bad initial data '{text}': {e}") from e

    raise ConfigError(f"unsupported initial data for {which}: '{text}'")


def build_initial_data(cfg: ScenarioConfig, grid: Grid) -> tuple[Field, Field]:
    if cfg.seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {cfg.seed}")
    rng = np.random.default_rng(cfg.seed)
    u_in = initial_field(cfg.u_init, grid, rng, 'u')
    v_in = initial_field(cfg.v_init, grid, rng, 'v')
    if u_in.min() < 0 or v_in.min() < 0:
        raise ConfigError("initial data must be nonnegative")
    return u_in, v_in


def check_hypotheses(cfg: ScenarioConfig, u_in: Field, v_in: Field, motility: MotilitySpec) -> bool:
    """
    Check the hypotheses of the convergence theorem: M > 0 and gamma > 0 on
    [0, ||v_in||_inf]. Raises ConfigError in n3-strict mode when they fail;
    returns whether they hold.
    """
    V = float(np.max(np.abs(v_in.values)))
    if V > motility.s_max:
        raise ConfigError(f"motility '{cfg.gamma}' is sampled up to {motility.s_max:g} < V = {V:g}")

    M = mean(u_in)
    holds = M > 0 and satisfies_n3(motility, V)
    if cfg.strict and not holds:
        raise ConfigError(
            f"scenario '{cfg.name}' is n3-strict but M = {M:g} and min gamma on [0, {V:g}] "
            f"violate the hypotheses; use mode = free to run it anyway"
        )

    drift = derivative_consistency(motility, V)
    if drift > 1e-6:
        logger.warning("gamma' disagrees with finite differences of gamma by %.2e", drift)
    return holds
