"""
Set-function oracles and the exact tools built directly on them.

A `SubmodularOracle` evaluates F on subsets of V = {0..p-1} with F(empty) = 0
enforced at construction. The greedy algorithm gives the Lovasz extension and
linear maximization over the base polytope B(F); the exhaustive helpers
(brute-force minimization, base membership, submodularity scan) are the
verification oracles for small ground sets.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import GroundSetTooLarge, InstanceError
from .sets import ElementSet

BRUTE_FORCE_LIMIT = 22
_CHUNK_BITS = 16

SetLike = Union[ElementSet, np.ndarray, Sequence[int]]


class SubmodularOracle(ABC):
    """Evaluation interface for a normalized set function.

    Subclasses set their own fields first and call `super().__init__(p)` last;
    the base constructor caches the raw value of the empty set and subtracts it
    from every evaluation afterwards.
    """

    def __init__(self, p: int):
        self.p = int(p)
        self._offset = float(self._raw_evaluate(np.zeros(self.p, dtype=bool)))

    @abstractmethod
    def _raw_evaluate(self, mask: np.ndarray) -> float:
        """Unnormalized value of the subset given by a boolean mask."""

    def _raw_evaluate_batch(self, masks: np.ndarray) -> np.ndarray:
        return np.array([self._raw_evaluate(m) for m in masks], dtype=float)

    def _raw_prefix_values(self, order: np.ndarray) -> np.ndarray:
        mask = np.zeros(self.p, dtype=bool)
        values = np.empty(order.size + 1, dtype=float)
        values[0] = self._raw_evaluate(mask)
        for k, j in enumerate(order):
            mask[j] = True
            values[k + 1] = self._raw_evaluate(mask)
        return values

    def _as_mask(self, subset: SetLike) -> np.ndarray:
        if isinstance(subset, ElementSet):
            if subset.p != self.p:
                raise ValueError(f"set over {subset.p} elements passed to oracle over {self.p}")
            return subset.mask
        arr = np.asarray(subset)
        if arr.dtype == bool:
            if arr.shape != (self.p,):
                raise ValueError(f"mask of shape {arr.shape} passed to oracle over {self.p}")
            return arr
        idx = arr.astype(np.intp).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= self.p):
            raise InstanceError(f"indices {idx[(idx < 0) | (idx >= self.p)].tolist()} out of range for {self.p} elements")
        mask = np.zeros(self.p, dtype=bool)
        mask[idx] = True
        return mask

    def evaluate(self, subset: SetLike) -> float:
        mask = self._as_mask(subset)
        if not mask.any():
            return 0.0
        return float(self._raw_evaluate(mask)) - self._offset

    def evaluate_batch(self, masks: np.ndarray) -> np.ndarray:
        masks = np.asarray(masks, dtype=bool).reshape(-1, self.p)
        values = np.asarray(self._raw_evaluate_batch(masks), dtype=float) - self._offset
        values[~masks.any(axis=1)] = 0.0
        return values

    def prefix_values(self, order: Sequence[int]) -> np.ndarray:
        """F(empty), F({j1}), ..., F({j1..jm}) along a sequence of distinct indices.

        The sequence may be partial (m < p); elements absent from it are never added.
        """
        order = np.asarray(order, dtype=np.intp)
        values = np.asarray(self._raw_prefix_values(order), dtype=float) - self._offset
        values[0] = 0.0
        return values

    def __call__(self, subset: SetLike) -> float:
        return self.evaluate(subset)


@dataclass
class BasePoint:
    """A point of B(F), optionally stored as a convex combination of greedy vertices."""
    coords: np.ndarray
    atoms: Optional[List[Tuple[np.ndarray, float]]] = None

    def validate(self, oracle: SubmodularOracle, sum_tol: float = 1e-8, atom_tol: float = 1e-10) -> bool:
        if abs(float(self.coords.sum()) - oracle.evaluate(ElementSet.full(oracle.p))) > sum_tol:
            return False
        if self.atoms is None:
            return True
        weights = np.array([lam for _, lam in self.atoms])
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            return False
        rebuilt = sum(lam * v for v, lam in self.atoms)
        return bool(np.allclose(rebuilt, self.coords, atol=atom_tol, rtol=0))


def decreasing_order(w: np.ndarray) -> np.ndarray:
    """Indices sorting w in decreasing order; equal entries keep ascending index order."""
    return np.argsort(-np.asarray(w, dtype=float), kind="stable")


def greedy_vertex(oracle: SubmodularOracle, order: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Base vertex for a full ordering, plus the prefix values computed on the way."""
    order = np.asarray(order, dtype=np.intp)
    values = oracle.prefix_values(order)
    s = np.empty(oracle.p, dtype=float)
    s[order] = np.diff(values)
    return s, values


def greedy_linear_maximize(oracle: SubmodularOracle, w: np.ndarray) -> BasePoint:
    w = np.asarray(w, dtype=float)
    if w.shape != (oracle.p,):
        raise ValueError(f"direction of shape {w.shape} for ground set of size {oracle.p}")
    s, _ = greedy_vertex(oracle, decreasing_order(w))
    return BasePoint(coords=s)


def lovasz_extension(oracle: SubmodularOracle, w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    return float(np.dot(w, greedy_linear_maximize(oracle, w).coords))


# --- exhaustive tools for small ground sets ---

def _guard(p: int, limit: int = BRUTE_FORCE_LIMIT):
    if p > limit:
        raise GroundSetTooLarge(p, limit)


def subset_masks(p: int, start: int, stop: int) -> np.ndarray:
    """Masks of the subsets encoded by integers start..stop-1 (bit k <-> element k)."""
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(p, dtype=np.int64)) & 1).astype(bool)


def iter_subset_chunks(p: int) -> Iterator[Tuple[int, np.ndarray]]:
    total = 1 << p
    chunk = 1 << _CHUNK_BITS
    for start in range(0, total, chunk):
        yield start, subset_masks(p, start, min(start + chunk, total))


def all_subset_values(oracle: SubmodularOracle) -> np.ndarray:
    """F at every subset, indexed by the subset's integer code."""
    _guard(oracle.p)
    return np.concatenate([oracle.evaluate_batch(m) for _, m in iter_subset_chunks(oracle.p)])


class BruteForceResult(NamedTuple):
    min_value: float
    minimal_minimizer: ElementSet
    maximal_minimizer: ElementSet


def brute_force_sfm(oracle: SubmodularOracle) -> BruteForceResult:
    p = oracle.p
    _guard(p)
    values = all_subset_values(oracle)
    min_value = float(values.min())
    tol = 1e-9 * float(values.max() - min_value)

    minimal = np.ones(p, dtype=bool)
    maximal = np.zeros(p, dtype=bool)
    for start, masks in iter_subset_chunks(p):
        chunk_values = values[start:start + masks.shape[0]]
        hits = masks[chunk_values <= min_value + tol]
        if hits.size:
            minimal &= hits.all(axis=0)
            maximal |= hits.any(axis=0)

    return BruteForceResult(min_value, ElementSet(minimal), ElementSet(maximal))


def check_base_membership(oracle: SubmodularOracle, s: np.ndarray, tol: float = 1e-8) -> bool:
    p = oracle.p
    _guard(p)
    s = np.asarray(s, dtype=float)
    if abs(float(s.sum()) - oracle.evaluate(ElementSet.full(p))) > tol:
        return False
    for _, masks in iter_subset_chunks(p):
        if np.any(masks @ s > oracle.evaluate_batch(masks) + tol):
            return False
    return True


def submodularity_violations(oracle: SubmodularOracle, pairs: int = 1000, seed: int = 0,
                             exhaustive_limit: int = 4096) -> int:
    """Number of pairs (A, B) with F(A) + F(B) < F(A | B) + F(A & B) beyond round-off."""
    p = oracle.p
    n = 1 << p
    if p <= BRUTE_FORCE_LIMIT and n <= exhaustive_limit:
        values = all_subset_values(oracle)
        tol = 1e-9 * max(1.0, float(np.abs(values).max()))
        codes = np.arange(n, dtype=np.int64)
        count = 0
        for a in range(n):
            lhs = values[a] + values
            rhs = values[a | codes] + values[a & codes]
            count += int(np.count_nonzero(lhs < rhs - tol))
        return count

    rng = np.random.default_rng(seed)
    a = rng.random((pairs, p)) < 0.5
    b = rng.random((pairs, p)) < 0.5
    fa, fb = oracle.evaluate_batch(a), oracle.evaluate_batch(b)
    fu, fi = oracle.evaluate_batch(a | b), oracle.evaluate_batch(a & b)
    tol = 1e-9 * max(1.0, float(np.abs(np.concatenate([fa, fb, fu, fi])).max()))
    return int(np.count_nonzero(fa + fb < fu + fi - tol))
