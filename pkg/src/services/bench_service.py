from statistics import median
from typing import Dict, List, Optional, Sequence

import structlog

from ..core.errors import UsageError
from ..core.schemas import BenchRow, ScreeningMode, SolverKind
from ..repositories.run_repository import RunRepository
from ..sfm.oracle import SubmodularOracle
from ..sfm.screening import iaes_solve

logger = structlog.get_logger(__name__)

DEFAULT_VARIANTS = [ScreeningMode.NONE, ScreeningMode.AES, ScreeningMode.IES, ScreeningMode.IAES]


class BenchService:
    """Timing matrix of screening variants against the unscreened baseline on one instance."""

    def __init__(self, runs: Optional[RunRepository] = None):
        self.runs = runs

    def run(
        self,
        oracle: SubmodularOracle,
        instance_name: str,
        solver: SolverKind = SolverKind.WOLFE,
        variants: Sequence[ScreeningMode] = tuple(DEFAULT_VARIANTS),
        trials: int = 3,
        eps: float = 1e-6,
        rho: float = 0.5,
        max_iter: Optional[int] = None,
    ) -> List[BenchRow]:
        variants = [ScreeningMode(v) for v in dict.fromkeys(variants)]
        if len(variants) < 2 or ScreeningMode.NONE not in variants:
            raise UsageError("a bench matrix needs at least two variants including the 'none' baseline")
        if trials < 1:
            raise UsageError("trials must be at least 1")

        timings: Dict[ScreeningMode, Dict[str, float]] = {}
        for variant in variants:
            screen, solve, total, values = [], [], [], []
            for trial in range(trials):
                _, report = iaes_solve(oracle, eps=eps, rho=rho, solver=SolverKind(solver).value,
                                       mode=variant, max_iter=max_iter)
                screen.append(report.screen_time_s)
                solve.append(report.solver_time_s)
                total.append(report.total_time_s)
                values.append(report.value)
            timings[variant] = {"screen": median(screen), "solve": median(solve), "total": median(total),
                                "value": values[0]}
            logger.info("bench_variant", instance=instance_name, variant=variant.value, **timings[variant])

        baseline = timings[ScreeningMode.NONE]["total"]
        rows = [
            BenchRow(
                instance_name=instance_name,
                variant=variant.value,
                screen_time_s=t["screen"],
                solver_time_s=t["solve"],
                total_time_s=t["total"],
                speedup=baseline / t["total"] if t["total"] > 0 else float("inf"),
                value=t["value"],
            )
            for variant, t in timings.items()
        ]
        if self.runs is not None:
            self.runs.write_bench(rows)
        return rows
