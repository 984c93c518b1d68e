from typing import Optional, Tuple

import structlog

from ..core.schemas import ScreeningMode, SolveSummary, SolverKind
from ..repositories.run_repository import RunRepository
from ..sfm.oracle import SubmodularOracle
from ..sfm.screening import IaesReport, iaes_solve

logger = structlog.get_logger(__name__)


def summarize(instance_name: str, report: IaesReport, solver: SolverKind, screening: ScreeningMode) -> SolveSummary:
    return SolveSummary(
        instance=instance_name,
        solver=solver,
        screening=screening,
        minimizer=report.minimizer.to_list(),
        value=report.value,
        final_gap=report.final_gap,
        iterations=report.iterations,
        oracle_calls=report.oracle_calls,
        n_triggers=report.n_triggers,
        final_rejection_ratio=report.final_rejection_ratio,
        screen_time_s=report.screen_time_s,
        solver_time_s=report.solver_time_s,
        total_time_s=report.total_time_s,
    )


class SolveService:
    def __init__(self, runs: Optional[RunRepository] = None):
        self.runs = runs

    def solve(
        self,
        oracle: SubmodularOracle,
        instance_name: str,
        solver: SolverKind = SolverKind.WOLFE,
        screening: ScreeningMode = ScreeningMode.IAES,
        eps: float = 1e-6,
        rho: float = 0.5,
        max_iter: Optional[int] = None,
    ) -> Tuple[SolveSummary, IaesReport]:
        solver, screening = SolverKind(solver), ScreeningMode(screening)
        logger.info("solve_started", instance=instance_name, p=oracle.p, solver=solver.value,
                    screening=screening.value, eps=eps, rho=rho)
        _, report = iaes_solve(oracle, eps=eps, rho=rho, solver=solver.value, mode=screening, max_iter=max_iter)
        summary = summarize(instance_name, report, solver, screening)
        if self.runs is not None:
            self.persist(self.runs, summary, report)
        return summary, report

    def persist(self, runs: RunRepository, summary: SolveSummary, report: IaesReport):
        runs.write_trace(report.trace)
        if summary.screening != ScreeningMode.NONE:
            runs.write_rejection(report.triggers)
        runs.write_summary(summary)
        logger.info("run_persisted", directory=str(runs.root))
