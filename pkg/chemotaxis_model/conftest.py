import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_DIR = Path(__file__).resolve().parent
if str(PROJECT_DIR) not in sys.path:
    sys.path.insert(0, str(PROJECT_DIR))

from src.config import ScenarioConfig  # noqa: E402
from src.elliptic import PoissonWorkspace  # noqa: E402
from src.grid import Field, Grid  # noqa: E402
from src.motility import parse_motility  # noqa: E402
from src.stepper import make_state  # noqa: E402

SCENARIO_DIR = PROJECT_DIR / 'scenarios'


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid_1d():
    return Grid((1.0,), (32,))


@pytest.fixture
def grid_2d():
    return Grid((1.0, 2.0), (8, 12))


@pytest.fixture
def small_state(grid_1d, rng):
    """Perturbed density and a bumpy signal on 32 cells, gamma = exp(-s)."""
    u = Field(grid_1d, 1.0 + 0.5 * rng.uniform(-1.0, 1.0, grid_1d.size))
    x = grid_1d.centers(0)
    v = Field(grid_1d, 0.5 + 0.4 * np.cos(np.pi * x))
    return make_state(u, v, parse_motility('exp:1'), PoissonWorkspace(grid_1d))


def _scenario(**overrides) -> ScenarioConfig:
    """Small 1D scenario for fast runs; keyword arguments replace fields."""
    fields = dict(
        name='small',
        lengths=(1.0,),
        cells=(32,),
        gamma='exp:1',
        u_init='perturbed:1.0,0.5',
        v_init='constant:1.0',
        t_end=0.05,
        tau=1e-3,
        cadence=5,
        seed=1,
    )
    fields.update(overrides)
    return ScenarioConfig(**fields).validate()


@pytest.fixture
def make_config():
    return _scenario


@pytest.fixture
def small_config():
    return _scenario()
