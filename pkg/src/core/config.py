import os
from functools import lru_cache

from pydantic import BaseModel, Field


class Settings(BaseModel):
    """Process-wide defaults, overridable through SFM_* environment variables."""
    log_level: str = "INFO"
    output_dir: str = "runs"
    eps: float = Field(1e-6, gt=0)
    rho: float = Field(0.5, gt=0, lt=1)
    trials: int = Field(3, ge=1)
    brute_force_limit: int = Field(22, ge=1, le=22)

    @classmethod
    def from_env(cls) -> "Settings":
        env = {
            "log_level": os.environ.get("SFM_LOG_LEVEL"),
            "output_dir": os.environ.get("SFM_OUTPUT_DIR"),
            "eps": os.environ.get("SFM_EPS"),
            "rho": os.environ.get("SFM_RHO"),
            "trials": os.environ.get("SFM_TRIALS"),
            "brute_force_limit": os.environ.get("SFM_BRUTE_FORCE_LIMIT"),
        }
        return cls(**{k: v for k, v in env.items() if v is not None})


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings.from_env()
