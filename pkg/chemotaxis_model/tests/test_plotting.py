import numpy as np
import pandas as pd

from src.plotting import PANELS, plot_profiles, plot_trajectory


def test_trajectory_plot(tmp_path):
    t = np.linspace(0.0, 1.0, 11)
    history = pd.DataFrame({column: np.exp(-t) for column, _ in PANELS})
    history['t'] = t
    # an all-zero panel falls back to a linear axis
    history['vLinf'] = 0.0
    path = plot_trajectory(history, tmp_path / 'plots' / 'trajectory.png', title='decay')
    assert path.stat().st_size > 0


def test_profiles_plot(tmp_path):
    x = np.linspace(0.0, 1.0, 16)
    path = plot_profiles(1.0 + np.cos(np.pi * x), np.exp(-x), x, tmp_path / 'profiles.png', 0.5)
    assert path.stat().st_size > 0
