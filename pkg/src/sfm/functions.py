"""
Concrete submodular oracles: modular and concave-of-cardinality functions,
graph cuts with unary potentials, Gaussian-process mutual information with a
label prior, and the seeded random families used for testing.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from ..core.errors import FactorizationFailure, InstanceError, NegativeEdgeWeight
from .oracle import SubmodularOracle


class ModularOracle(SubmodularOracle):
    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)
        super().__init__(self.weights.size)

    def _raw_evaluate(self, mask):
        return float(self.weights[mask].sum())

    def _raw_evaluate_batch(self, masks):
        return masks @ self.weights

    def _raw_prefix_values(self, order):
        return np.concatenate(([0.0], np.cumsum(self.weights[order])))


class ConcaveCardinalityOracle(SubmodularOracle):
    """F(A) = g(|A|) + m(A) with g concave; `g` must accept integer arrays."""

    def __init__(self, p: int, g: Callable[[np.ndarray], np.ndarray], weights=None):
        self.g = g
        self.weights = np.zeros(p) if weights is None else np.asarray(weights, dtype=float)
        if self.weights.shape != (p,):
            raise InstanceError(f"modular part must have length {p}, got {self.weights.size}")
        super().__init__(p)

    def _raw_evaluate(self, mask):
        return float(self.g(np.asarray(np.count_nonzero(mask)))) + float(self.weights[mask].sum())

    def _raw_evaluate_batch(self, masks):
        return np.asarray(self.g(masks.sum(axis=1)), dtype=float) + masks @ self.weights

    def _raw_prefix_values(self, order):
        sizes = np.arange(order.size + 1)
        return np.asarray(self.g(sizes), dtype=float) + np.concatenate(([0.0], np.cumsum(self.weights[order])))


def iwata_oracle(p: int) -> ConcaveCardinalityOracle:
    """F(A) = |A||V \\ A| - sum_{j in A} (5j - 2p), with elements numbered 1..p."""
    weights = -(5.0 * np.arange(1, p + 1) - 2.0 * p)
    return ConcaveCardinalityOracle(p, lambda t: t * (p - t), weights)


# --- graph cuts ---

@dataclass
class WeightedGraph:
    p: int
    heads: np.ndarray
    tails: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.heads = np.asarray(self.heads, dtype=np.intp)
        self.tails = np.asarray(self.tails, dtype=np.intp)
        self.weights = np.asarray(self.weights, dtype=float)
        if not (self.heads.shape == self.tails.shape == self.weights.shape):
            raise InstanceError("edge arrays must have equal length")
        if self.heads.size:
            if np.any(self.heads == self.tails):
                raise InstanceError("self-loops are not allowed")
            if min(self.heads.min(), self.tails.min()) < 0 or max(self.heads.max(), self.tails.max()) >= self.p:
                raise InstanceError(f"edge endpoint out of range for {self.p} vertices")
        # store each edge once with head < tail
        lo = np.minimum(self.heads, self.tails)
        hi = np.maximum(self.heads, self.tails)
        self.heads, self.tails = lo, hi
        if np.unique(lo * max(self.p, 1) + hi).size != lo.size:
            raise InstanceError("duplicate edges")
        if np.any(self.weights < 0):
            raise NegativeEdgeWeight("cut functions need nonnegative edge weights")

    @classmethod
    def from_edges(cls, p: int, edges: Iterable[Tuple[int, int, float]]) -> "WeightedGraph":
        edges = list(edges)
        if not edges:
            return cls(p, np.empty(0), np.empty(0), np.empty(0))
        heads, tails, weights = zip(*edges)
        return cls(p, np.array(heads), np.array(tails), np.array(weights, dtype=float))

    @property
    def n_edges(self) -> int:
        return int(self.heads.size)


class CutOracle(SubmodularOracle):
    """F(A) = u(A) + total weight of edges crossing (A, V \\ A)."""

    def __init__(self, graph: WeightedGraph, unary):
        self.graph = graph
        self.unary = np.asarray(unary, dtype=float)
        if self.unary.shape != (graph.p,):
            raise InstanceError(f"unary vector of length {self.unary.size} for {graph.p} vertices")
        super().__init__(graph.p)

    def _raw_evaluate(self, mask):
        g = self.graph
        return float(self.unary[mask].sum() + g.weights[mask[g.heads] != mask[g.tails]].sum())

    def _raw_evaluate_batch(self, masks):
        g = self.graph
        return masks @ self.unary + (masks[:, g.heads] != masks[:, g.tails]) @ g.weights

    def _raw_prefix_values(self, order):
        g = self.graph
        p = self.p
        absent = p + 1
        pos = np.full(p, absent, dtype=np.intp)
        pos[order] = np.arange(order.size)
        ph, pt = pos[g.heads], pos[g.tails]
        first = np.where(ph < pt, g.heads, g.tails)
        second = np.where(ph < pt, g.tails, g.heads)
        # an edge starts crossing when its first endpoint enters and stops when the second does
        entered = np.minimum(ph, pt) < absent
        closed = np.maximum(ph, pt) < absent
        gains = self.unary.copy()
        gains += np.bincount(first[entered], weights=g.weights[entered], minlength=p)
        gains -= np.bincount(second[closed], weights=g.weights[closed], minlength=p)
        return np.concatenate(([0.0], np.cumsum(gains[order])))


def cut_oracle(graph: WeightedGraph, unary) -> CutOracle:
    return CutOracle(graph, unary)


def grid_edge_index(height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row-major 8-neighbour edge list of an H x W grid, each edge once with head < tail."""
    idx = np.arange(height * width).reshape(height, width)
    pairs = [
        (idx[:, :-1], idx[:, 1:]),      # horizontal
        (idx[:-1, :], idx[1:, :]),      # vertical
        (idx[:-1, :-1], idx[1:, 1:]),   # diagonal
        (idx[:-1, 1:], idx[1:, :-1]),   # anti-diagonal
    ]
    heads = np.concatenate([a.ravel() for a, _ in pairs])
    tails = np.concatenate([b.ravel() for _, b in pairs])
    return np.minimum(heads, tails), np.maximum(heads, tails)


# --- Gaussian-process mutual information ---

@dataclass
class KernelMatrix:
    K: np.ndarray
    jitter: float = 0.0

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=float)
        if self.K.ndim != 2 or self.K.shape[0] != self.K.shape[1]:
            raise InstanceError("kernel matrix must be square")
        if not np.allclose(self.K, self.K.T, atol=1e-12, rtol=0):
            raise InstanceError("kernel matrix must be symmetric")

    @classmethod
    def from_points(cls, points: np.ndarray, alpha: float = 1.5, jitter_scale: float = 1e-8) -> "KernelMatrix":
        points = np.asarray(points, dtype=float).reshape(-1, 2) if np.size(points) == 0 else np.asarray(points, dtype=float)
        K = np.exp(-alpha * cdist(points, points, "sqeuclidean"))
        jitter = jitter_scale * float(np.mean(np.diag(K))) if K.size else 0.0
        return cls(K + jitter * np.eye(K.shape[0]), jitter)

    @property
    def p(self) -> int:
        return self.K.shape[0]


def _logdet(block: np.ndarray) -> float:
    if block.size == 0:
        return 0.0
    try:
        L = linalg.cholesky(block, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise FactorizationFailure(f"kernel block of size {block.shape[0]} is not positive definite") from e
    return 2.0 * float(np.log(np.diag(L)).sum())


def _prefix_logdets(block: np.ndarray) -> np.ndarray:
    """log det of every leading principal block, from a single factorization."""
    if block.size == 0:
        return np.zeros(1)
    try:
        L = linalg.cholesky(block, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise FactorizationFailure("permuted kernel is not positive definite") from e
    return np.concatenate(([0.0], np.cumsum(2.0 * np.log(np.diag(L)))))


@dataclass
class LabelPrior:
    eta: np.ndarray
    clamp: float = 1e-9

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        if np.any((self.eta < 0) | (self.eta > 1)):
            raise InstanceError("label prior must lie in [0, 1]")
        if not 0 < self.clamp < 0.5:
            raise InstanceError("clamp must lie in (0, 1/2)")

    @classmethod
    def from_labels(cls, p: int, labels: Mapping[int, bool], clamp: float = 1e-9) -> "LabelPrior":
        eta = np.full(p, 0.5)
        for j, positive in labels.items():
            eta[int(j)] = 1.0 if positive else 0.0
        return cls(eta, clamp)

    def log_terms(self) -> Tuple[np.ndarray, np.ndarray]:
        eta = np.clip(self.eta, self.clamp, 1.0 - self.clamp)
        return np.log(eta), np.log1p(-eta)


class MutualInfoOracle(SubmodularOracle):
    """F(A) = I(f_A; f_{V\\A}) - sum_A log eta - sum_{V\\A} log(1 - eta) for a Gaussian process."""

    def __init__(self, kernel: KernelMatrix, prior: LabelPrior):
        if prior.eta.shape != (kernel.p,):
            raise InstanceError("prior and kernel sizes differ")
        self.kernel = kernel
        self.prior = prior
        self._log_eta, self._log_not_eta = prior.log_terms()
        self._logdet_full = _logdet(kernel.K)
        super().__init__(kernel.p)

    def _raw_evaluate(self, mask):
        K = self.kernel.K
        inside, outside = np.flatnonzero(mask), np.flatnonzero(~mask)
        mi = 0.5 * (_logdet(K[np.ix_(inside, inside)]) + _logdet(K[np.ix_(outside, outside)]) - self._logdet_full)
        return mi - self._log_eta[mask].sum() - self._log_not_eta[~mask].sum()

    def _raw_prefix_values(self, order):
        K = self.kernel.K
        p, m = self.p, order.size
        rest = np.setdiff1d(np.arange(p), order, assume_unique=True)
        forward = np.concatenate((order, rest))
        backward = np.concatenate((rest, order[::-1]))
        inside_ld = _prefix_logdets(K[np.ix_(forward, forward)])[: m + 1]
        # complement of the k-th prefix is rest + order[k:], the leading p - k entries of `backward`
        outside_ld = _prefix_logdets(K[np.ix_(backward, backward)])[p - np.arange(m + 1)]
        mi = 0.5 * (inside_ld + outside_ld - self._logdet_full)
        in_prior = np.concatenate(([0.0], np.cumsum(self._log_eta[order])))
        out_prior = self._log_not_eta.sum() - np.concatenate(([0.0], np.cumsum(self._log_not_eta[order])))
        return mi - in_prior - out_prior


def mutual_info_oracle(kernel: KernelMatrix, prior: LabelPrior) -> MutualInfoOracle:
    return MutualInfoOracle(kernel, prior)


# --- seeded random families ---

def _random_modular(p: int, seed: int) -> SubmodularOracle:
    rng = np.random.default_rng(seed)
    return ModularOracle(rng.normal(0.0, 1.0, p))


def _random_concave(p: int, seed: int) -> SubmodularOracle:
    rng = np.random.default_rng(seed)
    scale = rng.uniform(0.5, 3.0)
    power = rng.uniform(0.3, 0.9)
    weights = rng.normal(-0.5 * scale, scale, p)
    return ConcaveCardinalityOracle(p, lambda t: scale * np.power(t, power), weights)


def _random_grid_cut(p: int, seed: int) -> SubmodularOracle:
    rng = np.random.default_rng(seed)
    height = max(h for h in range(1, int(np.sqrt(p)) + 1) if p % h == 0)
    heads, tails = grid_edge_index(height, p // height)
    graph = WeightedGraph(p, heads, tails, rng.uniform(0.0, 1.0, heads.size))
    return CutOracle(graph, rng.normal(0.0, 1.5, p))


def _random_sparse_cut(p: int, seed: int) -> SubmodularOracle:
    rng = np.random.default_rng(seed)
    heads, tails = np.triu_indices(p, k=1)
    # about three neighbours per vertex
    keep = rng.random(heads.size) < min(1.0, 3.0 / max(p - 1, 1))
    graph = WeightedGraph(p, heads[keep], tails[keep], rng.uniform(0.0, 1.0, int(keep.sum())))
    return CutOracle(graph, rng.normal(0.0, 1.5, p))


def _iwata(p: int, seed: int) -> SubmodularOracle:
    return iwata_oracle(p)


def oracle_catalog() -> Dict[str, Callable[[int, int], SubmodularOracle]]:
    """Seeded factories (p, seed) -> oracle for the randomized test families."""
    return {
        "modular": _random_modular,
        "concave": _random_concave,
        "grid_cut": _random_grid_cut,
        "sparse_cut": _random_sparse_cut,
        "iwata": _iwata,
    }
