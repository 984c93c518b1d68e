from pathlib import Path
from typing import Iterable, List, Optional, Union

import pandas as pd

from .base import BaseRepository
from ..core.errors import InvalidRunName
from ..core.schemas import BenchRow, SolveSummary, VerifyReport
from ..sfm.screening import TRIGGER_COLUMNS
from ..sfm.solver import TRACE_COLUMNS

BENCH_COLUMNS = list(BenchRow.model_fields)

TRACE_FILE = "trace.csv"
REJECTION_FILE = "rejection.csv"
SUMMARY_FILE = "summary.json"
BENCH_FILE = "bench.csv"
VERIFY_FILE = "verify.json"


class RunRepository(BaseRepository):
    """Result files of one run directory; `for_run` scopes a parent directory to a child run."""

    def for_run(self, name: str) -> "RunRepository":
        root = self.root.resolve()
        target = (root / name).resolve()
        if target == root or not target.is_relative_to(root):
            raise InvalidRunName(f"run name {name!r} leaves the output directory {root}")
        return RunRepository(target)

    def write_trace(self, rows: Iterable[tuple]) -> Path:
        return self.write_csv(TRACE_FILE, pd.DataFrame(list(rows), columns=TRACE_COLUMNS), TRACE_COLUMNS)

    def write_rejection(self, rows: Iterable[tuple]) -> Path:
        return self.write_csv(REJECTION_FILE, pd.DataFrame(list(rows), columns=TRIGGER_COLUMNS), TRIGGER_COLUMNS)

    def write_summary(self, summary: SolveSummary) -> Path:
        return self.write_json(SUMMARY_FILE, summary.model_dump(mode="json"))

    def write_bench(self, rows: List[BenchRow]) -> Path:
        frame = pd.DataFrame([r.model_dump() for r in rows], columns=BENCH_COLUMNS)
        return self.write_csv(BENCH_FILE, frame, BENCH_COLUMNS)

    def write_verify(self, report: VerifyReport) -> Path:
        return self.write_json(VERIFY_FILE, report.model_dump(mode="json"))

    def get_summary(self, name: Optional[str] = None) -> Optional[SolveSummary]:
        repo = self.for_run(name) if name else self
        if not repo.exists(SUMMARY_FILE):
            return None
        return SolveSummary(**repo.read_json(SUMMARY_FILE))

    def list_runs(self, limit: int = 50, offset: int = 0) -> List[str]:
        names = [d.name for d in self.list_dirs() if (d / SUMMARY_FILE).exists()]
        return names[offset:offset + limit]

    def read_trace(self, name: Union[str, None] = None) -> pd.DataFrame:
        repo = self.for_run(name) if name else self
        return repo.read_csv(TRACE_FILE)
