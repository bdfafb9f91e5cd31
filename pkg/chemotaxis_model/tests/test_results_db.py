import numpy as np
import pandas as pd
import pytest

from src.diagnostics import RECORD_COLUMNS
from src.results_db import RUN_COLUMNS, ScenarioRun, TrajectoryPoint, init_db, load_runs, save_run, save_sweep
from src.runner import RunSummary, SUMMARY_COLUMNS


@pytest.fixture
def session(tmp_path):
    engine, session = init_db(tmp_path / 'db' / 'sweep.db')
    yield session
    session.close()
    engine.dispose()


def _history(n=4):
    frame = pd.DataFrame(0.0, index=range(n), columns=RECORD_COLUMNS)
    frame['t'] = np.linspace(0.0, 1.0, n)
    frame['vL1'] = np.exp(-frame['t'])
    frame['prop6Slack'] = np.nan
    return frame


def test_run_columns_are_summary_fields():
    assert set(RUN_COLUMNS) <= set(SUMMARY_COLUMNS)


def test_save_and_load_sweep(session):
    table = pd.DataFrame([
        RunSummary(name='a', seed=1, M=1.0, liapunov_monotone=True).to_row(),
        RunSummary(name='b', status='ConfigError', message='bad gamma').to_row(),
    ], columns=SUMMARY_COLUMNS)
    save_sweep(session, table, [_history(), None])

    runs = load_runs(session)
    assert list(runs['name']) == ['a', 'b']
    assert list(runs['status']) == ['ok', 'ConfigError']
    assert runs.loc[0, 'M'] == 1.0
    assert bool(runs.loc[0, 'liapunov_monotone'])
    # NaN is stored as NULL
    assert runs['vl1_rate'].isna().all()

    first = session.query(ScenarioRun).filter_by(name='a').one()
    assert len(first.points) == 4
    assert first.points[-1].v_l1 == pytest.approx(np.exp(-1.0))
    assert first.points[0].liapunov_decay_slack is None
    assert session.query(TrajectoryPoint).count() == 4


def test_points_are_deleted_with_run(session):
    run = save_run(session, RunSummary(name='c').to_row(), _history(3))
    session.commit()
    session.delete(run)
    session.commit()
    assert session.query(TrajectoryPoint).count() == 0


def test_empty_database(session):
    assert load_runs(session).empty
