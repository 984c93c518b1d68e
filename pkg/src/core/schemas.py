from typing import List, Optional, Dict, Any
from pydantic import BaseModel, Field, computed_field, field_validator
from enum import Enum

from ..sfm.screening import ScreeningMode


class SolverKind(str, Enum):
    WOLFE = "wolfe"
    FRANK_WOLFE = "frank_wolfe"


class InstanceKind(str, Enum):
    TWO_MOONS = "two-moons"
    GRID = "grid"
    CUT = "cut"
    MODULAR = "modular"
    CONCAVE = "concave"
    IWATA = "iwata"
    RANDOM = "random"


NAME_PATTERN = r"^[A-Za-z0-9_-][A-Za-z0-9._-]*$"


class InstanceSpec(BaseModel):
    """Instance file contents; `data_paths` resolve against the instance file's directory."""
    name: str = Field("instance", pattern=NAME_PATTERN)
    kind: InstanceKind
    p: int = Field(..., ge=0)
    params: Dict[str, Any] = Field(default_factory=dict)
    data_paths: Dict[str, str] = Field(default_factory=dict)
    seed: int = 0


class RunConfig(BaseModel):
    instance: str
    solver: SolverKind = SolverKind.WOLFE
    screening: ScreeningMode = ScreeningMode.IAES
    eps: float = Field(1e-6, gt=0)
    rho: float = Field(0.5, gt=0, lt=1)
    max_iter: Optional[int] = Field(None, ge=1)
    seed: int = 0
    output_dir: str = "runs"


class SolveSummary(BaseModel):
    instance: str
    solver: SolverKind
    screening: ScreeningMode
    minimizer: List[int]
    value: float
    final_gap: float
    iterations: int
    oracle_calls: int
    n_triggers: int
    final_rejection_ratio: float
    screen_time_s: float
    solver_time_s: float
    total_time_s: float


class BenchRow(BaseModel):
    instance_name: str
    variant: str
    screen_time_s: float
    solver_time_s: float
    total_time_s: float
    speedup: float
    value: float


class VerifyReport(BaseModel):
    instances: int
    p_max: int
    seed: int = 0
    fault_injected: bool = False
    violations: Dict[str, int] = Field(default_factory=dict)

    @computed_field
    @property
    def passed(self) -> bool:
        return not any(self.violations.values())


class InstanceStats(BaseModel):
    name: str
    kind: InstanceKind
    p: int
    n_edges: Optional[int] = None
    n_labels: Optional[int] = None
    path: Optional[str] = None


# --- HTTP request / response models ---

class SolveRequest(BaseModel):
    instance: InstanceSpec
    solver: SolverKind = SolverKind.WOLFE
    screening: ScreeningMode = ScreeningMode.IAES
    eps: float = Field(1e-6, gt=0)
    rho: float = Field(0.5, gt=0, lt=1)
    max_iter: Optional[int] = Field(None, ge=1)
    persist: bool = False

    @field_validator("instance")
    @classmethod
    def inline_only(cls, v: InstanceSpec) -> InstanceSpec:
        if v.data_paths:
            raise ValueError("instances posted over HTTP must be fully described by params")
        return v


class VerifyRequest(BaseModel):
    trials: int = Field(100, ge=1, le=5000)
    p_max: int = Field(10, ge=1)
    seed: int = 0
    inject_fault: bool = False


class RunListItem(BaseModel):
    name: str
    summary: SolveSummary
