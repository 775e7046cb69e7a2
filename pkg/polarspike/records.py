from datetime import datetime, timezone
import json
from typing import Dict, List, Optional, Sequence

from sqlalchemy import Column, Float, ForeignKey, Integer, Text, func, inspect
from sqlalchemy.orm import Session, declarative_base, relationship
from sqlalchemy_utc import UtcDateTime

Base = declarative_base()


class ExperimentRun(Base):
    """
    A single invocation of a workbench command, with the flags it was given
    and how it ended.
    """
    __tablename__ = 'experiment_run'

    id = Column(Integer, primary_key=True)

    command = Column(Text, index=True, nullable=False)
    seed = Column(Integer)
    # JSON list of the command-line arguments
    argv = Column(Text, nullable=False, server_default='[]')
    exit_code = Column(Integer, nullable=False, server_default='0')
    created_at = Column(UtcDateTime, default=func.now(), nullable=False)

    metrics = relationship(
        'RunMetric',
        cascade="all, delete-orphan",
        order_by='RunMetric.index',
        back_populates='run')

    @property
    def arguments(self) -> List[str]:
        return json.loads(self.argv)

    @property
    def metric_values(self) -> Dict[str, float]:
        return {metric.name: metric.value for metric in self.metrics}

    @property
    def succeeded(self) -> bool:
        return self.exit_code == 0


class RunMetric(Base):
    """
    A named scalar produced by an experiment run: accuracy, max_abs_diff, P...
    """
    __tablename__ = 'run_metric'

    id = Column(Integer, primary_key=True)

    run_id = Column(Integer, ForeignKey('experiment_run.id'), nullable=False)
    run = relationship('ExperimentRun', back_populates='metrics')

    index = Column(Integer, nullable=False)
    name = Column(Text, nullable=False)
    value = Column(Float, nullable=False)


def init_models(engine):
    """
    Creates the ledger tables directly, bypassing migrations. Meant for
    throwaway databases such as the in-memory one of the tests; real ledgers
    are built with `alembic upgrade head`.
    """
    Base.metadata.create_all(engine)


def has_ledger(engine) -> bool:
    return inspect(engine).has_table(ExperimentRun.__tablename__)


def create_run(
            session: Session,
            command: str,
            metrics: Dict[str, float],
            seed: Optional[int] = None,
            argv: Sequence[str] = (),
            exit_code: int = 0,
        ) -> ExperimentRun:
    """
    Records a finished command.

    :param command: Name of the subcommand, e.g. 'train'.
    :param metrics: Scalars to keep, in the order they should be listed.
    :param argv: Arguments the command was invoked with.
    """
    run = ExperimentRun(
        command=command,
        seed=seed,
        argv=json.dumps(list(argv)),
        exit_code=exit_code,
        created_at=datetime.now(timezone.utc),
    )
    for index, (name, value) in enumerate(metrics.items()):
        run.metrics.append(RunMetric(index=index, name=name, value=float(value)))
    session.add(run)
    session.commit()
    return run


def get_latest_run(session: Session, command: Optional[str] = None) -> Optional[ExperimentRun]:
    """
    Returns the most recent run, of the given command if one is named, or None.
    """
    query = session.query(ExperimentRun)
    if command is not None:
        query = query.filter(ExperimentRun.command == command)
    return query\
        .order_by(ExperimentRun.created_at.desc(), ExperimentRun.id.desc())\
        .first()


def list_runs(session: Session, limit: int = 20) -> List[ExperimentRun]:
    return session.query(ExperimentRun)\
        .order_by(ExperimentRun.created_at.desc(), ExperimentRun.id.desc())\
        .limit(limit)\
        .all()
