from .db import DB
from .models import EvalRecord, RunRecord

__all__ = ["DB", "EvalRecord", "RunRecord"]
