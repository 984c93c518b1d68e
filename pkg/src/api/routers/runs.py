from fastapi import APIRouter, Depends, HTTPException, Query
from typing import List

from ...core.config import get_settings
from ...core.errors import InvalidRunName
from ...core.schemas import RunListItem, SolveSummary
from ...repositories.run_repository import RunRepository

router = APIRouter(prefix="/api/runs", tags=["runs"])


def get_repository() -> RunRepository:
    return RunRepository(get_settings().output_dir)


@router.get("", response_model=List[RunListItem])
def list_runs(
    limit: int = Query(50, ge=1, le=500),
    offset: int = Query(0, ge=0),
    repo: RunRepository = Depends(get_repository)
):
    """List persisted runs with their summaries."""
    result = []
    for name in repo.list_runs(limit=limit, offset=offset):
        summary = repo.get_summary(name)
        if summary is not None:
            result.append(RunListItem(name=name, summary=summary))
    return result


@router.get("/{name}", response_model=SolveSummary)
def get_run(name: str, repo: RunRepository = Depends(get_repository)):
    if "/" in name or name.startswith("."):
        raise HTTPException(status_code=400, detail="Invalid run name")
    try:
        summary = repo.get_summary(name)
    except InvalidRunName:
        raise HTTPException(status_code=400, detail="Invalid run name")
    if not summary:
        raise HTTPException(status_code=404, detail="Run not found")
    return summary
