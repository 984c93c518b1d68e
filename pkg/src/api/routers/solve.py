import uuid

from fastapi import APIRouter, Depends, HTTPException

from ...core.config import get_settings
from ...core.errors import SFMError, UsageError
from ...core.schemas import SolveRequest, SolveSummary
from ...repositories.run_repository import RunRepository
from ...services.instance_service import InstanceService
from ...services.solve_service import SolveService

router = APIRouter(prefix="/api/solve", tags=["solve"])


def get_instance_service() -> InstanceService:
    return InstanceService()


def get_service() -> SolveService:
    return SolveService()


def error_response(e: SFMError) -> HTTPException:
    return HTTPException(status_code=422 if isinstance(e, UsageError) else 400, detail=e.message or str(e))


@router.post("", response_model=SolveSummary)
def solve(
    request: SolveRequest,
    instances: InstanceService = Depends(get_instance_service),
    service: SolveService = Depends(get_service)
):
    """Solve an inline instance; `persist` writes the run files under the configured output directory."""
    try:
        oracle = instances.build_oracle(request.instance)
        summary, report = service.solve(
            oracle, request.instance.name, solver=request.solver, screening=request.screening,
            eps=request.eps, rho=request.rho, max_iter=request.max_iter,
        )
    except SFMError as e:
        raise error_response(e)

    if request.persist:
        try:
            runs = RunRepository(get_settings().output_dir).for_run(f"{request.instance.name}-{uuid.uuid4().hex[:8]}")
        except SFMError as e:
            raise error_response(e)
        service.persist(runs, summary, report)
    return summary
