"""
Database module for the motion_transformer run ledger.
"""

import json
import logging
from typing import Any

from sqlalchemy.exc import SQLAlchemyError
from sqlmodel import Session, SQLModel, create_engine, select

from motion_transformer.db.models import EvalRecord, RunRecord
from motion_transformer.training.evaluate import EvalReport
from motion_transformer.types import DataError

logger = logging.getLogger(__name__)


class DB:
    """Run ledger backed by any SQLAlchemy URL, e.g. sqlite:///runs.db."""

    def __init__(self, db_path_url: str):
        self.db_path_url = db_path_url

        # Parallel runs may race on the first table creation.
        retries = 2
        last_error: Exception | None = None
        for _ in range(retries):
            try:
                self.engine = create_engine(db_path_url)
                SQLModel.metadata.create_all(self.engine)
                break
            except SQLAlchemyError as e:
                last_error = e
                logger.warning(f"Failed to connect to database. Retrying... {e}")
        else:
            raise DataError(f"Failed to connect to database {db_path_url}: {last_error}")

    def __enter__(self) -> "DB":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.close()

    def drop_all(self) -> None:
        """Drop all tables in the database."""
        SQLModel.metadata.drop_all(self.engine)

    def close(self) -> None:
        """Close the database connection and release resources."""
        if hasattr(self, "engine") and self.engine is not None:
            self.engine.dispose()

    def record_run(self, experiment_id: str, command: str, seed: int, manifest: dict[str, Any], status: str = "started") -> None:
        """Insert or update the run row for experiment_id."""
        manifest_json = json.dumps(manifest, sort_keys=True, default=str)
        with Session(self.engine) as session:
            existing = session.exec(select(RunRecord).where(RunRecord.experiment_id == experiment_id)).first()
            if existing is None:
                session.add(RunRecord(experiment_id=experiment_id, command=command, seed=seed, status=status, manifest_json=manifest_json))
            else:
                existing.status = status
                existing.manifest_json = manifest_json
                session.add(existing)
            session.commit()

    def record_eval(self, experiment_id: str, mode: str, report: EvalReport) -> None:
        with Session(self.engine) as session:
            session.add(EvalRecord(experiment_id=experiment_id, mode=mode, **report.to_json()))
            session.commit()

    def get_run(self, experiment_id: str) -> RunRecord | None:
        with Session(self.engine) as session:
            return session.exec(select(RunRecord).where(RunRecord.experiment_id == experiment_id)).first()

    def query_runs(self, command: str | None = None) -> list[RunRecord]:
        with Session(self.engine) as session:
            query = select(RunRecord)
            if command is not None:
                query = query.where(RunRecord.command == command)
            return list(session.exec(query).all())

    def query_evals(self, experiment_id: str | None = None) -> list[EvalRecord]:
        with Session(self.engine) as session:
            query = select(EvalRecord)
            if experiment_id is not None:
                query = query.where(EvalRecord.experiment_id == experiment_id)
            return list(session.exec(query).all())
