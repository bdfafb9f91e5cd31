import logging
from pathlib import Path

import matplotlib

# Headless backend for batch runs
matplotlib.use('Agg')

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PANELS = [
    ('liapunov', 'Liapunov functional L'),
    ('uMinusM_L2', '||u - M||_2'),
    ('vH1', '||v||_H1'),
    ('vLinf', '||v||_inf'),
]


def plot_trajectory(history: pd.DataFrame, path, title: str = ''):
    """Log-scale time series of the main decay quantities, one panel each."""
    path = Path(path)
    fig, axes = plt.subplots(2, 2, figsize=(11, 7), sharex=True)

    t = history['t'].to_numpy(dtype=float)
    for ax, (column, label) in zip(axes.flat, PANELS):
        values = history[column].to_numpy(dtype=float)
        positive = values > 0
        if positive.any():
            ax.semilogy(t[positive], values[positive], 'b-', linewidth=1.5)
        else:
            ax.plot(t, values, 'b-', linewidth=1.5)
        ax.set_title(label)
        ax.grid(True, alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel('t')

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info("Saved trajectory plot to %s", path)
    return path


def plot_profiles(u: np.ndarray, v: np.ndarray, x: np.ndarray, path, t: float):
    """u and v against x for a 1D snapshot."""
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(x, u, 'b-', linewidth=1.5, label='u')
    ax.plot(x, v, 'r--', linewidth=1.5, label='v')
    ax.set_xlabel('x')
    ax.set_title(f't = {t:g}')
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
