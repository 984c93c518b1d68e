from contextlib import asynccontextmanager

import structlog
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .routers import runs, solve, verify
from ..core.config import get_settings
from ..core.logging_config import configure_logging

logger = structlog.get_logger(__name__)


# --- Lifecycle ---
@asynccontextmanager
async def lifespan(app: FastAPI):
    """Lifecycle events."""
    settings = get_settings()
    configure_logging(settings.log_level)
    logger.info("api_starting", output_dir=settings.output_dir, eps=settings.eps, rho=settings.rho)
    yield
    logger.info("api_stopping")


app = FastAPI(
    title="SFM Screening API",
    description="Submodular minimization with safe element screening",
    version="0.1.0",
    lifespan=lifespan
)

# --- Middleware ---
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# --- Routers ---
app.include_router(solve.router)
app.include_router(verify.router)
app.include_router(runs.router)


@app.get("/")
def read_root():
    return {"message": "SFM screening backend running."}
