"""
SQLite store for sweep results: one ScenarioRun per run summary and its
TrajectoryPoint rows (a subset of the diagnostics columns).
"""

import logging
import math
from pathlib import Path

import pandas as pd
from sqlalchemy import Boolean, Column, Float, ForeignKey, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

logger = logging.getLogger(__name__)

Base = declarative_base()


class ScenarioRun(Base):
    __tablename__ = 'scenario_runs'

    id = Column(Integer, primary_key=True)
    name = Column(String)
    status = Column(String)  # 'ok' or the error class
    message = Column(String)
    mode = Column(String)  # 'n3-strict' or 'free'
    n3_holds = Column(Boolean)
    gamma = Column(String)
    cells = Column(String)  # e.g. "128" or "64x64"
    seed = Column(Integer)
    tau = Column(Float)
    t_end = Column(Float)
    steps = Column(Integer)

    # Derived constants
    M = Column(Float)
    V = Column(Float)
    c1 = Column(Float)
    gamma_star = Column(Float)
    c2 = Column(Float)

    # Verdicts
    final_u_dev_l2 = Column(Float)
    final_v_h1 = Column(Float)
    final_liapunov = Column(Float)
    liapunov_monotone = Column(Boolean)
    linf_monotone = Column(Boolean)
    max_mass_drift = Column(Float)
    max_dissipation_defect = Column(Float)
    vl1_rate = Column(Float)

    points = relationship("TrajectoryPoint", back_populates="run", cascade="all, delete-orphan")


class TrajectoryPoint(Base):
    __tablename__ = 'trajectory_points'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('scenario_runs.id'))
    t = Column(Float)
    mass_mean = Column(Float)
    v_linf = Column(Float)
    v_l1 = Column(Float)
    v_h1 = Column(Float)
    u_dev_l2 = Column(Float)
    grad_p_l2 = Column(Float)
    liapunov = Column(Float)
    liapunov_decay_slack = Column(Float)

    run = relationship("ScenarioRun", back_populates="points")


# trajectory column -> diagnostics CSV column
POINT_COLUMNS = {
    't': 't',
    'mass_mean': 'massMean',
    'v_linf': 'vLinf',
    'v_l1': 'vL1',
    'v_h1': 'vH1',
    'u_dev_l2': 'uMinusM_L2',
    'grad_p_l2': 'gradP_L2',
    'liapunov': 'liapunov',
    'liapunov_decay_slack': 'prop6Slack',
}

RUN_COLUMNS = [c.name for c in ScenarioRun.__table__.columns if c.name != 'id']


def init_db(db_path='results/sweep.db'):
    Path(db_path).parent.mkdir(parents=True, exist_ok=True)
    engine = create_engine(f'sqlite:///{db_path}')
    Base.metadata.create_all(engine)
    Session = sessionmaker(bind=engine)
    return engine, Session()


def _clean(value):
    # SQLite stores NaN as NULL
    if isinstance(value, float) and math.isnan(value):
        return None
    if hasattr(value, 'item'):
        return _clean(value.item())
    return value


def save_run(session, summary: dict, history: pd.DataFrame | None = None) -> ScenarioRun:
    run = ScenarioRun(**{key: _clean(summary.get(key)) for key in RUN_COLUMNS})
    if history is not None:
        for _, row in history.iterrows():
            run.points.append(TrajectoryPoint(
                **{attr: _clean(row[column]) for attr, column in POINT_COLUMNS.items()}
            ))
    session.add(run)
    return run


def save_sweep(session, table: pd.DataFrame, histories: list | None = None) -> list[ScenarioRun]:
    """Store every row of a sweep table, with trajectories when given (aligned with the rows)."""
    runs = []
    for i, summary in enumerate(table.to_dict('records')):
        history = histories[i] if histories is not None else None
        runs.append(save_run(session, summary, history))
    session.commit()
    logger.info("Stored %d runs", len(runs))
    return runs


def load_runs(session) -> pd.DataFrame:
    runs = session.query(ScenarioRun).order_by(ScenarioRun.id).all()
    return pd.DataFrame([{key: getattr(run, key) for key in ['id'] + RUN_COLUMNS} for run in runs])
