"""
Safe element screening for submodular minimization.

A duality-gap certificate (w, s, G) of the proximal problem confines the
optimum w* to the intersection of a ball of radius sqrt(2G) around w, an
l1 shell and the plane sum(w) = -F(V). Bounds of [w*]_j over that region
decide signs, hence membership of j in every minimizer; decided elements are
removed by contraction and the solve continues on the smaller problem.
"""

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
import structlog

from ..core.errors import ConflictingVerdict, DegenerateGroundSet, MaxIterationsExceeded, PreconditionViolated
from .oracle import SubmodularOracle, greedy_vertex, decreasing_order
from .sets import ElementSet
from .solver import GapEvaluation, TraceRow, duality_gap, make_solver

log = structlog.get_logger(__name__)

MARGIN = 1e-10


class ScreeningMode(str, Enum):
    NONE = "none"
    AES = "aes"
    IES = "ies"
    IAES = "iaes"


class SignConstraint(str, Enum):
    NONPOSITIVE = "nonpositive"
    NONNEGATIVE = "nonnegative"


def _best_prefix(values: np.ndarray) -> int:
    # argmin returns the first occurrence, i.e. the smallest prefix among ties
    return int(np.argmin(values))


@dataclass
class GapCertificate:
    w_hat: np.ndarray
    s_hat: np.ndarray
    gap: float
    f_ground: float
    best_superlevel_value: float
    s_l1: float
    superlevel_set: Optional[ElementSet] = None

    @classmethod
    def from_evaluation(cls, w: np.ndarray, s: np.ndarray, evaluation: GapEvaluation) -> "GapCertificate":
        w = np.asarray(w, dtype=float)
        s = np.asarray(s, dtype=float)
        k = _best_prefix(evaluation.prefix_values)
        superlevel = ElementSet.from_indices(w.size, evaluation.order[:k])
        return cls(w, s, evaluation.gap, float(evaluation.prefix_values[-1]),
                   float(evaluation.prefix_values[k]), float(np.abs(s).sum()), superlevel)

    @property
    def p_hat(self) -> int:
        return self.w_hat.size

    @property
    def radius(self) -> float:
        return float(np.sqrt(2.0 * max(self.gap, 0.0)))

    @property
    def l1_floor(self) -> float:
        return self.f_ground - 2.0 * self.best_superlevel_value

    def validate(self, oracle_hat: SubmodularOracle, tol: float = 1e-9) -> bool:
        recomputed = duality_gap(oracle_hat, self.w_hat, self.s_hat)
        return abs(recomputed - self.gap) <= tol * max(1.0, abs(self.gap)) and self.l1_floor <= self.s_l1 + tol


@dataclass
class ScreeningState:
    active: ElementSet
    inactive: ElementSet
    remaining: np.ndarray
    f_active: float = 0.0

    @classmethod
    def initial(cls, p: int) -> "ScreeningState":
        return cls(ElementSet.empty(p), ElementSet.empty(p), np.arange(p), 0.0)

    @property
    def p(self) -> int:
        return self.active.p

    @property
    def n_screened(self) -> int:
        return len(self.active) + len(self.inactive)

    @property
    def rejection_ratio(self) -> float:
        return self.n_screened / self.p if self.p else 1.0

    def lift(self, reduced_mask: np.ndarray) -> ElementSet:
        return ElementSet.from_indices(self.p, self.remaining[np.asarray(reduced_mask, dtype=bool)])

    def with_screened(self, new_active: ElementSet, new_inactive: ElementSet,
                      oracle: SubmodularOracle) -> "ScreeningState":
        active = self.active | new_active
        inactive = self.inactive | new_inactive
        remaining = np.flatnonzero(~(active | inactive).mask)
        return ScreeningState(active, inactive, remaining, oracle.evaluate(active))


class CoordinateBounds(NamedTuple):
    j: int
    w_min: float
    w_max: float


# --- contraction ---

class ContractedOracle(SubmodularOracle):
    """F_hat(C) = F(E | lift(C)) - F(E) on the remaining elements."""

    def __init__(self, base: SubmodularOracle, state: ScreeningState):
        self.base = base
        self.active_indices = state.active.indices()
        self.remaining = np.asarray(state.remaining, dtype=np.intp)
        self.f_active = state.f_active
        super().__init__(self.remaining.size)

    def _lift_masks(self, masks: np.ndarray) -> np.ndarray:
        full = np.zeros((masks.shape[0], self.base.p), dtype=bool)
        full[:, self.active_indices] = True
        full[:, self.remaining] = masks
        return full

    def _raw_evaluate(self, mask):
        return float(self.base.evaluate(self._lift_masks(mask[None, :])[0])) - self.f_active

    def _raw_evaluate_batch(self, masks):
        return self.base.evaluate_batch(self._lift_masks(masks)) - self.f_active

    def _raw_prefix_values(self, order):
        k = self.active_indices.size
        values = self.base.prefix_values(np.concatenate((self.active_indices, self.remaining[order])))
        return values[k:] - values[k]


def contract(oracle: SubmodularOracle, state: ScreeningState) -> SubmodularOracle:
    if state.n_screened == 0:
        return oracle
    return ContractedOracle(oracle, state)


def best_superlevel_set(oracle_hat: SubmodularOracle, w_hat: np.ndarray) -> Tuple[ElementSet, float]:
    order = decreasing_order(w_hat)
    values = oracle_hat.prefix_values(order)
    k = _best_prefix(values)
    return ElementSet.from_indices(oracle_hat.p, order[:k]), float(values[k])


# --- region bounds ---

def _sphere_plane_bounds(cert: GapCertificate) -> Tuple[np.ndarray, np.ndarray]:
    w = cert.w_hat
    p_hat = w.size
    if p_hat < 1:
        raise DegenerateGroundSet("no coordinates left to bound")
    if p_hat == 1:
        pinned = np.full(1, -cert.f_ground)
        return pinned, pinned.copy()
    r2 = 2.0 * max(cert.gap, 0.0)
    rest = w.sum() - w + cert.f_ground
    b = 2.0 * (rest - (p_hat - 1) * w)
    c = rest ** 2 - (p_hat - 1) * (r2 - w ** 2)
    disc = b ** 2 - 4.0 * p_hat * c
    if np.any(disc < 0):
        log.debug("discriminant_clamped", count=int(np.count_nonzero(disc < 0)), worst=float(disc.min()))
    root = np.sqrt(np.maximum(disc, 0.0))
    return (-b - root) / (2.0 * p_hat), (-b + root) / (2.0 * p_hat)


def coordinate_bounds_bp(cert: GapCertificate, j: int) -> CoordinateBounds:
    """Extremes of [w]_j over the ball intersected with the plane."""
    lo, hi = _sphere_plane_bounds(cert)
    return CoordinateBounds(j, float(lo[j]), float(hi[j]))


def coordinate_bounds_geometric(cert: GapCertificate, j: int) -> CoordinateBounds:
    """Same extremes, via the circle cut by the plane: centre, radius, then the j-th axis."""
    w = cert.w_hat
    p_hat = w.size
    if p_hat < 1:
        raise DegenerateGroundSet("no coordinates left to bound")
    offset = (w.sum() + cert.f_ground) / p_hat
    centre = w - offset
    circle = np.sqrt(max(2.0 * max(cert.gap, 0.0) - p_hat * offset ** 2, 0.0))
    reach = circle * np.sqrt(1.0 - 1.0 / p_hat)
    return CoordinateBounds(j, float(centre[j] - reach), float(centre[j] + reach))


def _check_sign_case(cert: GapCertificate, j: int, sign: SignConstraint) -> float:
    wj = float(cert.w_hat[j])
    r = cert.radius
    if sign == SignConstraint.NONPOSITIVE and not 0 < wj <= r:
        raise PreconditionViolated(f"[w]_{j} = {wj:.3e} is outside (0, {r:.3e}]")
    if sign == SignConstraint.NONNEGATIVE and not -r <= wj < 0:
        raise PreconditionViolated(f"[w]_{j} = {wj:.3e} is outside [-{r:.3e}, 0)")
    return abs(wj)


def l1_max_under_sign(cert: GapCertificate, j: int, sign: SignConstraint) -> float:
    """Largest l1 norm over the ball once [w]_j is forced across zero."""
    sign = SignConstraint(sign)
    a = _check_sign_case(cert, j, sign)
    r = cert.radius
    p_hat = cert.p_hat
    l1 = float(np.abs(cert.w_hat).sum())
    if a < r / np.sqrt(p_hat):
        return l1 - 2.0 * a + r * np.sqrt(p_hat)
    return l1 - a + np.sqrt(p_hat - 1) * np.sqrt(max(r * r - a * a, 0.0))


def l1_max_witness(cert: GapCertificate, j: int, sign: SignConstraint) -> np.ndarray:
    """A point of the constrained ball attaining `l1_max_under_sign`."""
    sign = SignConstraint(sign)
    a = _check_sign_case(cert, j, sign)
    r = cert.radius
    p_hat = cert.p_hat
    w = cert.w_hat
    direction = np.where(w >= 0, 1.0, -1.0)
    # coordinate j moves against its own sign
    direction[j] = -1.0 if sign == SignConstraint.NONPOSITIVE else 1.0
    if a < r / np.sqrt(p_hat):
        return w + (r / np.sqrt(p_hat)) * direction
    out = w.copy()
    out[j] = 0.0
    if p_hat > 1:
        step = np.sqrt(max(r * r - a * a, 0.0)) / np.sqrt(p_hat - 1)
        others = np.arange(p_hat) != j
        out[others] += step * direction[others]
    return out


def region_contains(cert: GapCertificate, w: np.ndarray, tol: float = 1e-8) -> bool:
    """Membership of w in ball, l1 shell and plane, each up to `tol`."""
    w = np.asarray(w, dtype=float)
    in_ball = float(np.sum((w - cert.w_hat) ** 2)) <= 2.0 * max(cert.gap, 0.0) + tol
    l1 = float(np.abs(w).sum())
    in_shell = cert.l1_floor - tol <= l1 <= cert.s_l1 + tol
    on_plane = abs(float(w.sum()) + cert.f_ground) <= tol * max(1.0, abs(cert.f_ground))
    return in_ball and in_shell and on_plane


# --- rules ---

def _rule_verdicts(cert: GapCertificate) -> Tuple[np.ndarray, np.ndarray]:
    w = cert.w_hat
    p_hat = w.size
    if p_hat == 0:
        return np.zeros(0, dtype=bool), np.zeros(0, dtype=bool)
    lo, hi = _sphere_plane_bounds(cert)
    if p_hat == 1:
        return lo > MARGIN, hi < -MARGIN

    nonzero = w != 0
    active = nonzero & (lo > MARGIN)
    inactive = nonzero & (hi < -MARGIN)

    r = cert.radius
    floor = cert.l1_floor - MARGIN
    for j in np.flatnonzero((w > 0) & (w <= r)):
        if l1_max_under_sign(cert, int(j), SignConstraint.NONPOSITIVE) < floor:
            active[j] = True
    for j in np.flatnonzero((w < 0) & (w >= -r)):
        if l1_max_under_sign(cert, int(j), SignConstraint.NONNEGATIVE) < floor:
            inactive[j] = True
    return active, inactive


def screen_pass(cert: GapCertificate, state: ScreeningState,
                mode: ScreeningMode = ScreeningMode.IAES) -> Tuple[ElementSet, ElementSet]:
    mode = ScreeningMode(mode)
    empty = ElementSet.empty(state.p)
    if mode == ScreeningMode.NONE:
        return empty, empty
    active, inactive = _rule_verdicts(cert)
    both = active & inactive
    if both.any():
        raise ConflictingVerdict([int(i) for i in state.remaining[both]])
    new_active = state.lift(active) if mode in (ScreeningMode.AES, ScreeningMode.IAES) else empty
    new_inactive = state.lift(inactive) if mode in (ScreeningMode.IES, ScreeningMode.IAES) else empty
    return new_active, new_inactive


def restrict_iterates(w_hat: np.ndarray, s_hat: np.ndarray, newly_screened: np.ndarray,
                      oracle_hat_new: SubmodularOracle) -> Tuple[np.ndarray, np.ndarray]:
    """Drop screened coordinates from w and re-anchor s at the greedy vertex of the new oracle."""
    w_new = np.asarray(w_hat, dtype=float)[~np.asarray(newly_screened, dtype=bool)]
    s_new, _ = greedy_vertex(oracle_hat_new, decreasing_order(w_new))
    return w_new, s_new


# --- driver ---

class TriggerRow(NamedTuple):
    trigger_index: int
    solver_iteration: int
    gap: float
    n_active: int
    n_inactive: int
    rejection_ratio: float
    p_hat: int
    elapsed_ns: int


TRIGGER_COLUMNS = list(TriggerRow._fields)


@dataclass
class IaesReport:
    minimizer: ElementSet
    value: float
    solver: str
    mode: ScreeningMode
    final_gap: float
    iterations: int
    oracle_calls: int
    screen_time_s: float
    solver_time_s: float
    triggers: List[TriggerRow] = field(default_factory=list)
    trace: List[TraceRow] = field(default_factory=list)
    final_state: Optional[ScreeningState] = None
    w_hat: Optional[np.ndarray] = None

    @property
    def total_time_s(self) -> float:
        return self.screen_time_s + self.solver_time_s

    @property
    def n_triggers(self) -> int:
        return len(self.triggers)

    @property
    def final_rejection_ratio(self) -> float:
        return self.final_state.rejection_ratio if self.final_state is not None else 0.0


def _final_set(oracle: SubmodularOracle, oracle_hat: SubmodularOracle, state: ScreeningState,
               cert: GapCertificate) -> ElementSet:
    positive = cert.w_hat > 0
    if cert.p_hat == 0 or cert.superlevel_set is None:
        return state.active
    chosen = positive
    value_positive = oracle_hat.evaluate(positive)
    tol = 1e-9 * max(1.0, abs(value_positive), abs(cert.best_superlevel_value))
    if value_positive > cert.best_superlevel_value + tol:
        log.warning("superlevel_fallback", positive_value=value_positive, superlevel_value=cert.best_superlevel_value)
        chosen = cert.superlevel_set.mask
    return state.active | state.lift(chosen)


def iaes_solve(oracle: SubmodularOracle, eps: float = 1e-6, rho: float = 0.5, solver: str = "wolfe",
               mode: ScreeningMode = ScreeningMode.IAES, max_iter: Optional[int] = None,
               on_trigger: Optional[Callable[[ScreeningState, GapCertificate], None]] = None,
               certificate_filter: Optional[Callable[[GapCertificate], GapCertificate]] = None,
               ) -> Tuple[ElementSet, IaesReport]:
    """Minimize F while screening elements whenever the gap has shrunk by a factor rho.

    `certificate_filter` lets a caller rewrite each certificate before the rules
    see it; the verification audit uses it for fault injection.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    mode = ScreeningMode(mode)
    started = time.perf_counter_ns()
    p = oracle.p
    max_iter = 50 * max(p, 1) if max_iter is None else max_iter

    state = ScreeningState.initial(p)
    oracle_hat = oracle
    engine = make_solver(solver, oracle_hat)
    g = float("inf")
    screen_ns = 0
    extra_calls = 0
    triggers: List[TriggerRow] = []

    while state.remaining.size:
        gap = engine.gap
        due = gap < rho * g or (gap <= eps and gap < g)
        if mode != ScreeningMode.NONE and due:
            t0 = time.perf_counter_ns()
            cert = GapCertificate.from_evaluation(engine.w, engine.s, engine.certificate())
            if certificate_filter is not None:
                cert = certificate_filter(cert)
            new_active, new_inactive = screen_pass(cert, state, mode)
            screened = (new_active | new_inactive).mask[state.remaining]
            if screened.any():
                state = state.with_screened(new_active, new_inactive, oracle)
                oracle_hat = contract(oracle, state)
                extra_calls += 2
                w_new, s_new = restrict_iterates(engine.w, engine.s, screened, oracle_hat)
                if state.remaining.size:
                    engine.reset(oracle_hat, w=w_new, s0=s_new)
            g = engine.gap if state.remaining.size else 0.0
            row = TriggerRow(len(triggers), engine.iteration, gap, len(state.active), len(state.inactive),
                             state.rejection_ratio, int(state.remaining.size), time.perf_counter_ns() - started)
            triggers.append(row)
            log.info("screening_trigger", trigger=row.trigger_index, iteration=row.solver_iteration, gap=gap,
                     n_active=row.n_active, n_inactive=row.n_inactive, p_hat=row.p_hat)
            if on_trigger is not None:
                on_trigger(state, cert)
            screen_ns += time.perf_counter_ns() - t0
            continue
        if gap <= eps:
            break
        if engine.iteration >= max_iter or engine.stalled:
            raise MaxIterationsExceeded(
                f"{engine.name} stopped at iteration {engine.iteration} with gap {gap:.3e} > {eps:.1e}",
                best=engine.report(converged=False))
        engine.step()

    if state.remaining.size:
        final_cert = GapCertificate.from_evaluation(engine.w, engine.s, engine.certificate())
        minimizer = _final_set(oracle, oracle_hat, state, final_cert)
        final_gap = engine.gap
        w_hat = engine.w.copy()
    else:
        minimizer = state.active
        final_gap = 0.0
        w_hat = np.zeros(0)

    total_ns = time.perf_counter_ns() - started
    report = IaesReport(
        minimizer=minimizer,
        value=oracle.evaluate(minimizer),
        solver=engine.name,
        mode=mode,
        final_gap=final_gap,
        iterations=engine.iteration,
        oracle_calls=engine.oracle_calls + extra_calls,
        screen_time_s=screen_ns / 1e9,
        solver_time_s=(total_ns - screen_ns) / 1e9,
        triggers=triggers,
        trace=list(engine.trace),
        final_state=state,
        w_hat=w_hat,
    )
    log.info("iaes_finished", mode=mode.value, value=report.value, iterations=report.iterations,
             rejection_ratio=report.final_rejection_ratio, triggers=report.n_triggers)
    return minimizer, report
