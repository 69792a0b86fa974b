"""Combine rules for internal tree nodes.

States are numbered ``1..k`` for infections and ``k+1`` for empty, both here
and in JSON tables. The compiled kernels use 0-based codes internally.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

STANDARD, MUTATION, DARY, TABLE = 0, 1, 2, 3


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class CombineTable:
    """Symmetric table mapping an unordered pair of child states to a parent state."""

    k: int
    entries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.k < 1:
            raise RuleError("table needs k >= 1")
        n = self.k + 1
        rows = tuple(tuple(int(v) for v in row) for row in self.entries)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise RuleError(f"table for k={self.k} must be {n}x{n}")
        for i in range(n):
            for j in range(n):
                if not 1 <= rows[i][j] <= n:
                    raise RuleError(f"entry [{i + 1}][{j + 1}]={rows[i][j]} outside 1..{n}")
                if rows[i][j] != rows[j][i]:
                    raise RuleError(f"table is not symmetric at ({i + 1},{j + 1})")
        object.__setattr__(self, "entries", rows)

    def __call__(self, a: int, b: int) -> int:
        return self.entries[a - 1][b - 1]

    @classmethod
    def standard(cls, k: int) -> "CombineTable":
        """Encoding of the annihilation-coalescence rules as a table."""
        e = k + 1
        rows = []
        for i in range(1, e + 1):
            row = []
            for j in range(1, e + 1):
                if i == j:
                    row.append(i)
                elif i == e:
                    row.append(j)
                elif j == e:
                    row.append(i)
                else:
                    row.append(e)
            rows.append(row)
        return cls(k, rows)

    @classmethod
    def constant(cls, k: int, state: int) -> "CombineTable":
        return cls(k, [[state] * (k + 1) for _ in range(k + 1)])

    @classmethod
    def from_dict(cls, obj: dict) -> "CombineTable":
        return cls(int(obj["k"]), obj["entries"])

    @classmethod
    def load(cls, path: str | Path) -> "CombineTable":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"k": self.k, "entries": [list(r) for r in self.entries]}

    def zero_based(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.int64).reshape(-1) - 1


@dataclass(frozen=True)
class Standard:
    arity = 2

    def __str__(self):
        return "standard"


@dataclass(frozen=True)
class Mutation:
    """Standard rules except a lone infected child passes its state on with probability q."""

    q: float
    arity = 2

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise RuleError(f"mutation needs q in (0,1), got {self.q!r}")

    def __str__(self):
        return f"mutation(q={self.q!r})"


@dataclass(frozen=True)
class DAry:
    """Annihilation-coalescence with ``arity`` children per node."""

    arity: int

    def __post_init__(self):
        if isinstance(self.arity, bool) or int(self.arity) != self.arity or self.arity < 2:
            raise RuleError(f"d-ary rules need an integer arity >= 2, got {self.arity!r}")

    def __str__(self):
        return f"dary(d={self.arity})"


@dataclass(frozen=True)
class Table:
    table: CombineTable
    arity = 2

    def __str__(self):
        return "table"


RuleSet = Union[Standard, Mutation, DAry, Table]

_DUMMY_TABLE = np.zeros(1, dtype=np.int64)


def kernel_params(rules: RuleSet, k: int) -> tuple[int, float, int, np.ndarray]:
    """Flatten a rule set into the ``(code, q, arity, table)`` the kernels take."""
    if isinstance(rules, Standard):
        return STANDARD, 0.0, 2, _DUMMY_TABLE
    if isinstance(rules, Mutation):
        if k != 2:
            raise RuleError(f"mutation rules are defined for k=2 only, got k={k}")
        return MUTATION, float(rules.q), 2, _DUMMY_TABLE
    if isinstance(rules, DAry):
        return DARY, 0.0, int(rules.arity), _DUMMY_TABLE
    if isinstance(rules, Table):
        if rules.table.k != k:
            raise RuleError(f"table is for k={rules.table.k}, distribution has k={k}")
        return TABLE, 0.0, 2, rules.table.zero_based()
    raise RuleError(f"unknown rule set {rules!r}")
