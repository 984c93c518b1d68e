"""
Solvers for the proximal pair

    primal   min_w  f(w) + 1/2 |w|^2          (f = Lovasz extension)
    dual     max_s  -1/2 |s|^2,  s in B(F)

Wolfe's minimum-norm-point method and conditional gradient (optionally with
away steps) are both written as stepping state machines so the screening
driver can interleave triggers with iterations and restart them on a
contracted oracle. After every step the primal candidate is refined by
isotonic regression and the duality gap is recomputed from scratch.
"""

import time
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np
import structlog
from scipy.optimize import isotonic_regression

from ..core.errors import MaxIterationsExceeded, NegativeGap, NumericalBreakdown
from .oracle import BasePoint, SubmodularOracle, decreasing_order, greedy_vertex, lovasz_extension

log = structlog.get_logger(__name__)

GAP_NOISE = 1e-9
ATOM_DROP = 1e-12
GRAM_JITTER = 1e-12
TRACE_COLUMNS = ["iteration", "gap", "dual_norm", "oracle_calls", "elapsed_ns"]


def primal_value(oracle: SubmodularOracle, w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    return lovasz_extension(oracle, w) + 0.5 * float(w @ w)


def dual_value(s: np.ndarray) -> float:
    s = np.asarray(s, dtype=float)
    return -0.5 * float(s @ s)


class GapEvaluation(NamedTuple):
    """Result of one greedy pass at the decreasing order of w."""
    gap: float
    primal: float
    dual: float
    order: np.ndarray
    prefix_values: np.ndarray


def _clamped_gap(primal: float, dual: float) -> float:
    gap = primal - dual
    if gap < 0:
        if gap < -GAP_NOISE * max(1.0, abs(primal), abs(dual)):
            raise NegativeGap(gap)
        return 0.0
    return gap


def evaluate_gap(oracle: SubmodularOracle, w: np.ndarray, s: np.ndarray) -> GapEvaluation:
    w = np.asarray(w, dtype=float)
    order = decreasing_order(w)
    s_w, values = greedy_vertex(oracle, order)
    primal = float(w @ s_w) + 0.5 * float(w @ w)
    dual = dual_value(s)
    return GapEvaluation(_clamped_gap(primal, dual), primal, dual, order, values)


def duality_gap(oracle: SubmodularOracle, w: np.ndarray, s: np.ndarray) -> float:
    return evaluate_gap(oracle, w, s).gap


def pav_refine(s: np.ndarray, ordering) -> np.ndarray:
    """Projection of -s onto {w : w[j1] >= w[j2] >= ... >= w[jp]} (pool adjacent violators)."""
    s = np.asarray(s, dtype=float)
    ordering = np.asarray(ordering, dtype=np.intp)
    w = np.empty_like(s)
    if s.size:
        w[ordering] = isotonic_regression(-s[ordering], increasing=False).x
    return w


class TraceRow(NamedTuple):
    iteration: int
    gap: float
    dual_norm: float
    oracle_calls: int
    elapsed_ns: int


@dataclass
class SolverState:
    s: BasePoint
    w: np.ndarray
    iteration: int = 0
    gap: float = float("inf")

    @property
    def corral(self):
        return self.s.atoms or []


@dataclass
class SolveReport:
    w_star: np.ndarray
    s_star: np.ndarray
    final_gap: float
    iterations: int
    oracle_calls: int
    trace: List[TraceRow] = field(default_factory=list)
    converged: bool = True

    def dual_norms(self) -> np.ndarray:
        return np.array([row.dual_norm for row in self.trace])


class _SteppingSolver:
    """Shared corral bookkeeping, primal refinement and gap certificate."""

    name = "base"

    def __init__(self, oracle: SubmodularOracle, s0: Optional[np.ndarray] = None):
        self._started = time.perf_counter_ns()
        self.oracle_calls = 0
        self.trace: List[TraceRow] = []
        self.iteration = 0
        self.reset(oracle, s0=s0)

    # --- state ---

    def reset(self, oracle: SubmodularOracle, w: Optional[np.ndarray] = None, s0: Optional[np.ndarray] = None):
        """Restart from a single vertex; default is the identity-order greedy vertex."""
        self.oracle = oracle
        p = oracle.p
        if s0 is None:
            s0, _ = greedy_vertex(oracle, np.arange(p))
            self.oracle_calls += 1
        self.atoms = np.asarray(s0, dtype=float).reshape(1, p)
        self.lambdas = np.ones(1)
        self.s = self.atoms[0].copy()
        self.w = -self.s if w is None else np.asarray(w, dtype=float).copy()
        self.stalled = False
        self._evaluation = self._evaluate(self.w)
        self._next_vertex()

    @property
    def gap(self) -> float:
        return self._evaluation.gap

    @property
    def p(self) -> int:
        return self.oracle.p

    @property
    def state(self) -> SolverState:
        atoms = [(a.copy(), float(lam)) for a, lam in zip(self.atoms, self.lambdas)]
        return SolverState(BasePoint(self.s.copy(), atoms), self.w.copy(), self.iteration, self.gap)

    def certificate(self) -> GapEvaluation:
        return self._evaluation

    # --- shared passes ---

    def _evaluate(self, w: np.ndarray) -> GapEvaluation:
        self.oracle_calls += 1
        return evaluate_gap(self.oracle, w, self.s)

    def _next_vertex(self):
        """Greedy vertex at -s; it is the next linear-oracle answer and the PAV target."""
        self._order = decreasing_order(-self.s)
        self._vertex, _ = greedy_vertex(self.oracle, self._order)
        self.oracle_calls += 1

    def _refine(self):
        self._next_vertex()
        self.w = pav_refine(self._vertex, self._order)
        self._evaluation = self._evaluate(self.w)

    def _drop_small_atoms(self):
        keep = self.lambdas > ATOM_DROP
        self.atoms, self.lambdas = self.atoms[keep], self.lambdas[keep]
        self.lambdas = self.lambdas / self.lambdas.sum()
        self.s = self.lambdas @ self.atoms

    def _record(self):
        row = TraceRow(self.iteration, self.gap, float(np.linalg.norm(self.s)), self.oracle_calls,
                       time.perf_counter_ns() - self._started)
        self.trace.append(row)
        log.debug("solver_step", solver=self.name, iteration=row.iteration, gap=row.gap, dual_norm=row.dual_norm)

    def step(self) -> float:
        if self.p == 0:
            self.stalled = True
            return self.gap
        self._advance()
        self.iteration += 1
        self._refine()
        self._record()
        return self.gap

    def _advance(self):
        raise NotImplementedError

    def report(self, converged: bool = True) -> SolveReport:
        return SolveReport(self.w.copy(), self.s.copy(), self.gap, self.iteration, self.oracle_calls,
                           list(self.trace), converged)


class MinNormPointSolver(_SteppingSolver):
    """Wolfe's method: one major cycle per `step()`."""

    name = "wolfe"

    def _affine_minimizer(self) -> np.ndarray:
        k = self.atoms.shape[0]
        gram = self.atoms @ self.atoms.T
        border = np.zeros((k + 1, k + 1))
        border[0, 1:] = border[1:, 0] = 1.0
        border[1:, 1:] = gram
        rhs = np.zeros(k + 1)
        rhs[0] = 1.0
        try:
            sol = np.linalg.solve(border, rhs)
            if np.all(np.isfinite(sol)) and np.linalg.cond(border) < 1e12:
                return sol[1:]
        except np.linalg.LinAlgError:
            pass
        log.debug("gram_jitter", corral_size=k)
        border[1:, 1:] += GRAM_JITTER * max(np.trace(gram), 1.0) * np.eye(k)
        try:
            sol = np.linalg.solve(border, rhs)
        except np.linalg.LinAlgError as e:
            raise NumericalBreakdown(f"corral Gram system of size {k} is singular") from e
        if not np.all(np.isfinite(sol)):
            raise NumericalBreakdown(f"corral Gram system of size {k} is singular")
        return sol[1:]

    def _advance(self):
        q = self._vertex
        norm_before = float(self.s @ self.s)
        scale = max(float(q @ q), float(np.max(np.einsum("ij,ij->i", self.atoms, self.atoms))))
        if float(self.s @ q) >= norm_before - 1e-15 * scale or np.any(np.all(np.abs(self.atoms - q) < 1e-12, axis=1)):
            self.stalled = True
            return
        self.atoms = np.vstack((self.atoms, q))
        self.lambdas = np.append(self.lambdas, 0.0)

        # minor cycles: each one removes at least one atom, so this terminates
        while True:
            b = self._affine_minimizer()
            if np.all(b > ATOM_DROP):
                self.lambdas = b
                self.s = b @ self.atoms
                break
            shrink = (b <= ATOM_DROP) & (self.lambdas - b > 0)
            theta = float(np.min(self.lambdas[shrink] / (self.lambdas - b)[shrink])) if shrink.any() else 0.0
            self.lambdas = theta * b + (1.0 - theta) * self.lambdas
            self.lambdas[shrink & (self.lambdas <= ATOM_DROP)] = 0.0
            self._drop_small_atoms()
        retained = bool(np.any(np.all(self.atoms == q, axis=1)))
        self.stalled = not retained and float(self.s @ self.s) >= norm_before


class FrankWolfeSolver(_SteppingSolver):
    """Conditional gradient on the dual with exact line search; away steps by default."""

    name = "frank_wolfe"

    def __init__(self, oracle: SubmodularOracle, s0: Optional[np.ndarray] = None, away_steps: bool = True):
        self.away_steps = away_steps
        super().__init__(oracle, s0)

    @classmethod
    def from_state(cls, oracle: SubmodularOracle, state: SolverState, away_steps: bool = False) -> "FrankWolfeSolver":
        solver = cls(oracle, state.s.coords, away_steps=away_steps)
        if state.s.atoms:
            solver.atoms = np.array([a for a, _ in state.s.atoms])
            solver.lambdas = np.array([lam for _, lam in state.s.atoms])
        solver.s = np.asarray(state.s.coords, dtype=float).copy()
        solver.w = np.asarray(state.w, dtype=float).copy()
        solver.iteration = state.iteration
        solver._next_vertex()
        solver._evaluation = solver._evaluate(solver.w)
        return solver

    @staticmethod
    def line_search(s: np.ndarray, d: np.ndarray, gamma_max: float = 1.0) -> float:
        """argmin over [0, gamma_max] of 1/2 |s + gamma d|^2."""
        dd = float(d @ d)
        if dd <= 0:
            return 0.0
        return float(np.clip(-float(s @ d) / dd, 0.0, gamma_max))

    def _advance(self):
        v = self._vertex
        d_fw = v - self.s
        direction, gamma_max, away = d_fw, 1.0, None
        if self.away_steps and self.atoms.shape[0] > 1:
            a = int(np.argmax(self.atoms @ self.s))
            d_away = self.s - self.atoms[a]
            lam = self.lambdas[a]
            if lam < 1.0 and float(-self.s @ d_away) > float(-self.s @ d_fw):
                direction, gamma_max, away = d_away, lam / (1.0 - lam), a

        gamma = self.line_search(self.s, direction, gamma_max)
        if gamma <= 0.0:
            self.stalled = True
            return
        self.stalled = False
        if away is None:
            self.lambdas *= 1.0 - gamma
            hit = np.flatnonzero(np.all(np.abs(self.atoms - v) < 1e-12, axis=1))
            if hit.size:
                self.lambdas[hit[0]] += gamma
            else:
                self.atoms = np.vstack((self.atoms, v))
                self.lambdas = np.append(self.lambdas, gamma)
        else:
            self.lambdas *= 1.0 + gamma
            self.lambdas[away] -= gamma
            if gamma >= gamma_max:
                self.lambdas[away] = 0.0
        self._drop_small_atoms()


def make_solver(kind: str, oracle: SubmodularOracle) -> _SteppingSolver:
    if kind == "wolfe":
        return MinNormPointSolver(oracle)
    if kind == "frank_wolfe":
        return FrankWolfeSolver(oracle)
    raise ValueError(f"unknown solver {kind!r}")


def run_solver(solver: _SteppingSolver, eps: float, max_iter: Optional[int] = None,
               callback: Optional[Callable[[_SteppingSolver], None]] = None,
               raise_on_max_iter: bool = True) -> SolveReport:
    if eps <= 0:
        raise ValueError("eps must be positive")
    max_iter = 50 * max(solver.p, 1) if max_iter is None else max_iter
    best: Optional[SolveReport] = None
    while solver.gap > eps:
        if solver.iteration >= max_iter or solver.stalled:
            best = best or solver.report(converged=False)
            message = (f"{solver.name} stopped at iteration {solver.iteration} with gap {solver.gap:.3e} > {eps:.1e}"
                       + (" (no further progress)" if solver.stalled else ""))
            if raise_on_max_iter:
                raise MaxIterationsExceeded(message, best=best)
            log.warning("solver_not_converged", solver=solver.name, gap=solver.gap, iterations=solver.iteration)
            return best
        solver.step()
        if callback is not None:
            callback(solver)
        if best is None or solver.gap < best.final_gap:
            best = solver.report(converged=False)
    log.info("solver_converged", solver=solver.name, iterations=solver.iteration, gap=solver.gap,
             oracle_calls=solver.oracle_calls)
    return solver.report(converged=True)


def min_norm_point(oracle: SubmodularOracle, eps: float = 1e-6, max_iter: Optional[int] = None,
                   callback: Optional[Callable[[_SteppingSolver], None]] = None,
                   raise_on_max_iter: bool = True) -> SolveReport:
    return run_solver(MinNormPointSolver(oracle), eps, max_iter, callback, raise_on_max_iter)


def frank_wolfe(oracle: SubmodularOracle, eps: float = 1e-6, max_iter: Optional[int] = None,
                away_steps: bool = True, raise_on_max_iter: bool = True) -> SolveReport:
    return run_solver(FrankWolfeSolver(oracle, away_steps=away_steps), eps, max_iter,
                      raise_on_max_iter=raise_on_max_iter)


def conditional_gradient_step(oracle: SubmodularOracle, state: SolverState, away_steps: bool = False) -> SolverState:
    solver = FrankWolfeSolver.from_state(oracle, state, away_steps=away_steps)
    solver.step()
    return solver.state
