import logging
from typing import NamedTuple

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from src.errors import FitError, InsufficientHistory

logger = logging.getLogger(__name__)


class RateFit(NamedTuple):
    quantity: str
    rate: float
    window: tuple[float, float]
    goodness: float


def fit_rate(history: pd.DataFrame, quantity: str, window: tuple[float, float]) -> RateFit:
    """
    Fit quantity(t) ~ a exp(-rate t) over the window by least squares on log(quantity).

    Args:
        history: trajectory table with a 't' column
        quantity: column to fit, e.g. 'vL1'
        window: (t0, t1) with t1 > t0

    Returns:
        RateFit with the decay rate (positive for decay) and the R^2 of the log-linear fit
    """
    t0, t1 = window
    if not t1 > t0:
        raise FitError(f"fit window needs t1 > t0, got ({t0}, {t1})")
    if quantity not in history.columns:
        raise FitError(f"unknown quantity '{quantity}'")

    in_window = history[(history['t'] >= t0) & (history['t'] <= t1)]
    if len(in_window) < 2:
        raise InsufficientHistory(f"fewer than two records of {quantity} in [{t0:g}, {t1:g}]")

    values = in_window[quantity].to_numpy(dtype=float)
    if np.any(values <= 0):
        raise FitError(f"{quantity} is not positive on [{t0:g}, {t1:g}]")

    X = in_window[['t']].to_numpy(dtype=float)
    y = np.log(values)
    model = LinearRegression().fit(X, y)
    goodness = r2_score(y, model.predict(X)) if np.ptp(y) > 0 else 1.0

    fit = RateFit(quantity, -float(model.coef_[0]), (float(t0), float(t1)), float(goodness))
    logger.debug("Fitted %s", fit)
    return fit


def tail_window(history: pd.DataFrame, fraction: float = 0.5) -> tuple[float, float]:
    """The last `fraction` of the stored time span."""
    t_first = float(history['t'].iloc[0])
    t_last = float(history['t'].iloc[-1])
    return t_last - fraction * (t_last - t_first), t_last
