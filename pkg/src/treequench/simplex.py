"""Points of the closed probability simplex over k infection states plus empty."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EPS_SUM = 1e-12
DEFAULT_TIE_TOL = 1e-9


class SimplexError(ValueError):
    """Raised for vectors that are not points of the simplex."""


@dataclass(frozen=True)
class Distribution:
    """Law of a node state: ``weights[i]`` is P(state i+1), the last entry is P(empty).

    Instances are immutable. Use :func:`make_distribution` to build one from
    slightly noisy input; the constructor only accepts exact simplex points
    (sum within ``EPS_SUM`` of 1, no negative entries).
    """

    k: int
    weights: tuple[float, ...]

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise SimplexError(f"k must be a positive integer, got {self.k!r}")
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "weights", w)
        if len(w) != self.k + 1:
            raise SimplexError(f"expected {self.k + 1} weights for k={self.k}, got {len(w)}")
        if any(not math.isfinite(x) or x < 0.0 for x in w):
            raise SimplexError(f"weights must be finite and nonnegative: {w}")
        if abs(math.fsum(w) - 1.0) > EPS_SUM:
            raise SimplexError(f"weights sum to {math.fsum(w)!r}, not 1")

    @property
    def empty(self) -> float:
        return self.weights[-1]

    @property
    def infected(self) -> tuple[float, ...]:
        return self.weights[:-1]

    def __getitem__(self, i: int) -> float:
        return self.weights[i]

    def __len__(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=np.float64)

    def permute(self, perm: Sequence[int]) -> "Distribution":
        """Reorder infection coordinates: new state ``j`` takes old state ``perm[j]`` (0-based)."""
        if sorted(perm) != list(range(self.k)):
            raise ValueError(f"not a permutation of 0..{self.k - 1}: {perm}")
        w = [self.weights[p] for p in perm] + [self.empty]
        return Distribution(self.k, tuple(w))

    def sup_distance(self, other: "Distribution") -> float:
        if other.k != self.k:
            raise ValueError("dimension mismatch")
        return max(abs(a - b) for a, b in zip(self.weights, other.weights))

    def to_dict(self) -> dict:
        return {"k": self.k, "weights": list(self.weights)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv_row(self) -> str:
        return ",".join(format_float(x) for x in self.weights)

    @classmethod
    def from_dict(cls, obj: dict) -> "Distribution":
        return make_distribution(int(obj["k"]), obj["weights"])

    @classmethod
    def from_json(cls, text: str) -> "Distribution":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_csv_row(cls, row: str) -> "Distribution":
        fields = [float(x) for x in row.strip().split(",")]
        return make_distribution(len(fields) - 1, fields)


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def make_distribution(k: int, weights: Sequence[float]) -> Distribution:
    """Validate and lightly repair a weight vector.

    Entries in ``(-EPS_SUM, 0)`` are clamped to zero and a sum within
    ``EPS_SUM`` of one is renormalized exactly. Anything further off raises
    :class:`SimplexError`.
    """
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise SimplexError(f"k must be a positive integer, got {k!r}")
    w = [float(x) for x in weights]
    if len(w) != k + 1:
        raise SimplexError(f"expected {k + 1} weights for k={k}, got {len(w)}")
    for x in w:
        if not math.isfinite(x):
            raise SimplexError(f"non-finite weight in {w}")
        if x <= -EPS_SUM:
            raise SimplexError(f"negative weight {x!r}")
    w = [0.0 if x < 0.0 else x for x in w]
    total = math.fsum(w)
    if abs(total - 1.0) > EPS_SUM:
        raise SimplexError(f"weights sum to {total!r}, not 1")
    if total != 1.0:
        w = [x / total for x in w]
    return Distribution(k, tuple(w))


def max_infected_block(d: Distribution, tie_tol: float = 0.0) -> tuple[int, float, list[int]]:
    """Infection states whose weight is within ``tie_tol`` of the largest one.

    Returns ``(count, max_value, indices)`` with 1-based state indices in
    increasing order. The empty state is never part of the block.
    """
    if tie_tol < 0:
        raise ValueError("tie_tol must be nonnegative")
    inf = d.infected
    top = max(inf)
    idx = [j + 1 for j, x in enumerate(inf) if top - x <= tie_tol]
    return len(idx), top, idx


def uniform(k: int, empty: float | None = None) -> Distribution:
    """All k infection states equally likely; empty gets ``empty`` (default: same share)."""
    if empty is None:
        return make_distribution(k, [1.0 / (k + 1)] * (k + 1))
    share = (1.0 - empty) / k
    return make_distribution(k, [share] * k + [empty])
