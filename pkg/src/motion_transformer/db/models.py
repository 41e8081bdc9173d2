"""
Database models for the run ledger.
"""

from typing import Optional

from sqlmodel import Field, SQLModel


class RunRecord(SQLModel, table=True):
    """One CLI invocation."""

    id: Optional[int] = Field(default=None, primary_key=True)
    experiment_id: str = Field(index=True, unique=True)
    command: str = Field(index=True)
    seed: int
    status: str = "started"
    manifest_json: str


class EvalRecord(SQLModel, table=True):
    """One evaluation report, linked to the run that produced it."""

    id: Optional[int] = Field(default=None, primary_key=True)
    experiment_id: str = Field(index=True)
    mode: str = Field(index=True)
    dl_rmse: float
    dpsi_rmse: float
    dl_mae: float
    dpsi_mae: float
    n_windows: int
