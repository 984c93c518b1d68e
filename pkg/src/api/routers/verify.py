from fastapi import APIRouter, Depends

from ...core.errors import SFMError
from ...core.schemas import VerifyReport, VerifyRequest
from ...services.verify_service import VerifyService
from .solve import error_response

router = APIRouter(prefix="/api/verify", tags=["verify"])


def get_service() -> VerifyService:
    return VerifyService()


@router.post("", response_model=VerifyReport)
def verify(request: VerifyRequest, service: VerifyService = Depends(get_service)):
    """Randomized brute-force audit; violations are reported, not raised."""
    try:
        return service.run(trials=request.trials, p_max=request.p_max, seed=request.seed,
                           inject_fault=request.inject_fault)
    except SFMError as e:
        raise error_response(e)
