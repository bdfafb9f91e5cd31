import numpy as np
import pandas as pd
import pytest

from src.errors import FitError, InsufficientHistory
from src.rates import fit_rate, tail_window


def _decay(rate, t_end=10.0, n=101, noise=0.0, seed=0):
    t = np.linspace(0.0, t_end, n)
    values = 3.0 * np.exp(-rate * t)
    if noise:
        values *= np.exp(noise * np.random.default_rng(seed).standard_normal(n))
    return pd.DataFrame({'t': t, 'vL1': values})


class TestFitRate:

    def test_exact_exponential(self):
        fit = fit_rate(_decay(0.7), 'vL1', (2.0, 8.0))
        assert fit.rate == pytest.approx(0.7, rel=1e-10)
        assert fit.goodness == pytest.approx(1.0)
        assert fit.window == (2.0, 8.0)

    def test_noisy_data_lowers_goodness(self):
        fit = fit_rate(_decay(1.0, noise=0.5), 'vL1', (0.0, 10.0))
        assert fit.rate == pytest.approx(1.0, abs=0.2)
        assert fit.goodness < 0.999

    def test_constant_quantity_has_zero_rate(self):
        history = pd.DataFrame({'t': np.linspace(0, 1, 11), 'vL1': np.full(11, 2.0)})
        fit = fit_rate(history, 'vL1', (0.0, 1.0))
        assert fit.rate == pytest.approx(0.0, abs=1e-12)
        assert fit.goodness == 1.0

    def test_reversed_window(self):
        with pytest.raises(FitError):
            fit_rate(_decay(1.0), 'vL1', (5.0, 1.0))

    def test_unknown_quantity(self):
        with pytest.raises(FitError):
            fit_rate(_decay(1.0), 'vH7', (0.0, 1.0))

    def test_window_with_one_record(self):
        with pytest.raises(InsufficientHistory):
            fit_rate(_decay(1.0), 'vL1', (0.01, 0.09))

    def test_nonpositive_values(self):
        history = _decay(1.0)
        history.loc[50, 'vL1'] = 0.0
        with pytest.raises(FitError):
            fit_rate(history, 'vL1', (0.0, 10.0))


def test_tail_window():
    history = pd.DataFrame({'t': [1.0, 2.0, 5.0]})
    assert tail_window(history) == (3.0, 5.0)
    assert tail_window(history, 0.25) == (4.0, 5.0)
