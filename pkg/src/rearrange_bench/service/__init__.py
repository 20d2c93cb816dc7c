from .contest import (
    BenchService,
    ContestConfig,
    LeaderboardSnapshot,
    Stage,
    Status,
    SubmissionRecord,
    contest_from_doc,
    evaluate_payload,
    load_contest,
)
from .store import RecordLog

__all__ = [
    "BenchService",
    "ContestConfig",
    "LeaderboardSnapshot",
    "RecordLog",
    "Stage",
    "Status",
    "SubmissionRecord",
    "contest_from_doc",
    "evaluate_payload",
    "load_contest",
]
