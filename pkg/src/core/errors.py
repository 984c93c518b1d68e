"""
Error hierarchy for the SFM library and its command line / HTTP surfaces.

Every error carries the process exit code the CLI reports for it:
2 usage, 3 numerical failure, 4 verification failure.
"""

from typing import Any, Dict, List, Optional


class SFMError(Exception):
    exit_code: int = 1

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message


# --- usage (exit 2) ---

class UsageError(SFMError):
    exit_code = 2


class GroundSetTooLarge(UsageError):
    def __init__(self, p: int, limit: int):
        super().__init__(f"ground set of size {p} exceeds the brute-force limit {limit}")
        self.p = p
        self.limit = limit


class InvalidCounts(UsageError):
    pass


class EmptySeeds(UsageError):
    pass


class InstanceError(UsageError):
    pass


class InvalidRunName(UsageError):
    pass


# --- numerical (exit 3) ---

class NumericalError(SFMError):
    exit_code = 3


class NegativeGap(NumericalError):
    def __init__(self, gap: float):
        super().__init__(f"duality gap {gap:.3e} is negative beyond round-off; s is outside B(F) or the oracle is broken")
        self.gap = gap


class NumericalBreakdown(NumericalError):
    pass


class FactorizationFailure(NumericalError):
    pass


class DegenerateGroundSet(NumericalError):
    pass


class PreconditionViolated(NumericalError):
    pass


class NegativeEdgeWeight(NumericalError):
    pass


class MaxIterationsExceeded(NumericalError):
    """Raised when a solver runs out of iterations; `best` is the best report so far."""

    def __init__(self, message: str, best: Optional[Any] = None):
        super().__init__(message)
        self.best = best


class ConflictingVerdict(NumericalError):
    def __init__(self, indices: List[int]):
        super().__init__(f"elements {indices} flagged both active and inactive; the gap certificate is broken")
        self.indices = indices


# --- verification (exit 4) ---

class VerificationFailed(SFMError):
    exit_code = 4

    def __init__(self, violations: Dict[str, int]):
        failing = {k: v for k, v in violations.items() if v}
        super().__init__(f"verification found violations: {failing}")
        self.violations = violations
