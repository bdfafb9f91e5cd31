import numpy as np
import pytest

from src.errors import ConfigError
from src.grid import Grid
from src.verification import check_laplacian, verify


class TestVerify:

    def test_small_scenario_passes(self, small_config):
        results = verify(small_config, samples=50)
        failed = [r for r in results if not r.passed]
        assert not failed, failed
        names = {r.name for r in results}
        assert {'poisson direct vs oracle', 'poisson cg vs oracle', 'u-step vs oracle',
                'v-step vs oracle', 'poincare constant vs eigensolve', 'step dissipation'} <= names

    def test_direct_poisson_scenario(self, make_config):
        results = verify(make_config(poisson_solver='direct'), samples=20)
        assert all(r.passed for r in results)
        assert 'poisson cg vs oracle' not in {r.name for r in results}

    def test_two_dimensional_custom_motility(self, scenario_dir, make_config):
        cfg = make_config(lengths=(1.0, 1.0), cells=(12, 16), gamma='custom:custom_gamma.txt',
                          v_init='cosine:1.0,0.5', base_dir=scenario_dir)
        results = verify(cfg, samples=20)
        assert all(r.passed for r in results), [r for r in results if not r.passed]

    def test_large_grid_skips_dense_oracles(self, make_config):
        results = verify(make_config(lengths=(1.0, 1.0), cells=(40, 40)), samples=5)
        assert all(r.passed for r in results)
        assert not any('oracle' in r.name for r in results)

    def test_invalid_scenario(self, make_config):
        with pytest.raises(ConfigError):
            verify(make_config(gamma='power:2'), samples=5)


def test_laplacian_checks_report_values(grid_2d):
    results = check_laplacian(grid_2d, np.random.default_rng(0), 10)
    assert [r.name for r in results] == ['laplacian conservative', 'laplacian symmetric', 'laplacian form sign']
    assert all(r.passed for r in results)
    assert results[1].value == 0.0
    assert all(r.value <= r.threshold for r in results)


def test_laplacian_checks_on_coarse_grid():
    results = check_laplacian(Grid((2.0,), (2,)), np.random.default_rng(1), 10)
    assert all(r.passed for r in results)
