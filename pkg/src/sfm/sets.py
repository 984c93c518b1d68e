from typing import Iterable, Iterator, List

import numpy as np


class ElementSet:
    """A subset of the ground set V = {0..p-1}, stored as a boolean mask."""

    __slots__ = ("_mask",)

    def __init__(self, mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 1:
            raise ValueError("ElementSet mask must be one-dimensional")
        self._mask = mask.copy()
        self._mask.setflags(write=False)

    @classmethod
    def empty(cls, p: int) -> "ElementSet":
        return cls(np.zeros(p, dtype=bool))

    @classmethod
    def full(cls, p: int) -> "ElementSet":
        return cls(np.ones(p, dtype=bool))

    @classmethod
    def from_indices(cls, p: int, indices: Iterable[int]) -> "ElementSet":
        mask = np.zeros(p, dtype=bool)
        idx = np.fromiter((int(i) for i in indices), dtype=np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= p):
            raise ValueError(f"indices out of range for ground set of size {p}")
        mask[idx] = True
        return cls(mask)

    @property
    def p(self) -> int:
        return self._mask.shape[0]

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self._mask)

    def to_list(self) -> List[int]:
        return [int(i) for i in self.indices()]

    def _check(self, other: "ElementSet"):
        if other.p != self.p:
            raise ValueError(f"ground set sizes differ: {self.p} vs {other.p}")

    def __or__(self, other: "ElementSet") -> "ElementSet":
        self._check(other)
        return ElementSet(self._mask | other._mask)

    def __and__(self, other: "ElementSet") -> "ElementSet":
        self._check(other)
        return ElementSet(self._mask & other._mask)

    def __sub__(self, other: "ElementSet") -> "ElementSet":
        self._check(other)
        return ElementSet(self._mask & ~other._mask)

    def __invert__(self) -> "ElementSet":
        return ElementSet(~self._mask)

    def complement(self) -> "ElementSet":
        return ~self

    def issubset(self, other: "ElementSet") -> bool:
        self._check(other)
        return not np.any(self._mask & ~other._mask)

    def isdisjoint(self, other: "ElementSet") -> bool:
        self._check(other)
        return not np.any(self._mask & other._mask)

    def __len__(self) -> int:
        return int(np.count_nonzero(self._mask))

    def __iter__(self) -> Iterator[int]:
        return iter(self.to_list())

    def __contains__(self, j: int) -> bool:
        return 0 <= j < self.p and bool(self._mask[j])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ElementSet):
            return NotImplemented
        return self.p == other.p and bool(np.array_equal(self._mask, other._mask))

    def __hash__(self) -> int:
        return hash((self.p, self._mask.tobytes()))

    def __repr__(self) -> str:
        return f"ElementSet(p={self.p}, {self.to_list()})"
