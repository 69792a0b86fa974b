"""Exact root-distribution dynamics.

One level of the tree maps the child law ``p(n)`` to the parent law
``p(n+1)``; the maps here are those polynomial updates for each rule set,
their one-dimensional reductions on the symmetric line, trajectory
iteration with diagnostics, and the closed-form limits of the standard and
mutation processes.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .rules import CombineTable, DAry, Mutation, RuleError, RuleSet, Standard, Table, kernel_params
from .simplex import (
    DEFAULT_TIE_TOL,
    Distribution,
    SimplexError,
    format_float,
    make_distribution,
    max_infected_block,
)

DEFAULT_CONV_TOL = 1e-12
DEFAULT_MAX_STEPS = 10**6
BOUND_EPS = 1e-12

_FIRST_CHUNK = 1024
_MAX_CHUNK = 1 << 20


class RenormalizationError(RuntimeError):
    """A map left the simplex by more than round-off. Always a bug."""


class StopReason(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"


def _check(d: Distribution) -> Distribution:
    if not isinstance(d, Distribution):
        raise TypeError(f"expected a Distribution, got {type(d).__name__}")
    return d


def raw_map(d: Distribution, rules: RuleSet) -> np.ndarray:
    """The map's output before clamping and renormalization."""
    code, q, arity, table = kernel_params(rules, _check(d).k)
    return np.array(kernels.map_step(d.as_array(), code, q, arity, table))


def apply_map(d: Distribution, rules: RuleSet) -> Distribution:
    y = kernels.renormalize(raw_map(d, rules))
    if y is None:
        raise RenormalizationError(f"{rules} map left the simplex at {d.weights}")
    return Distribution(d.k, tuple(y))


def apply_F(d: Distribution) -> Distribution:
    """Standard annihilation-coalescence update: ``p_i -> p_i^2 + 2 p_i p_E``."""
    return apply_map(d, Standard())


def apply_G(d: Distribution, q: float) -> Distribution:
    """Update for the k=2 process where a lone infected child is kept with probability q."""
    if _check(d).k != 2:
        raise RuleError(f"G is defined for k=2 only, got k={d.k}")
    return apply_map(d, Mutation(q))


def apply_dary(d: Distribution, arity: int) -> Distribution:
    """``p_i -> (p_i + p_E)^d - p_E^d``; empty takes the remainder."""
    return apply_map(d, DAry(arity))


def apply_table(d: Distribution, table: CombineTable) -> Distribution:
    return apply_map(d, Table(table))


def scalar_f(x: float, k: int) -> float:
    """Standard map restricted to the line where all k infections are equal."""
    return (1 - 2 * k) * x * x + 2 * x


def attractor_f(k: int) -> float:
    return 1.0 / (2 * k - 1)


def scalar_g(x: float, q: float) -> float:
    """Mutation map restricted to the line ``p_1 = p_2``."""
    return (1 - 4 * q) * x * x + 2 * q * x


def attractor_g(q: float) -> float:
    if q > 0.5:
        return (2 * q - 1) / (4 * q - 1)
    return 0.0


# ------------------------------------------------------------- trajectories


def _descending_order(d: Distribution) -> np.ndarray:
    return np.argsort(-np.asarray(d.infected), kind="stable")


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """``p(0), ..., p(N)`` plus per-step diagnostics.

    Diagnostics use the descending order of the infection coordinates at
    step 0 (``order``, 0-based), held fixed for the whole run. With ``p_(1)``
    the largest, ``block`` the size of the maximal block at step 0 and
    ``p_E`` the empty weight:

    * ``z = p_E - sum of p_(j) for j >= 2``
    * ``y = z + p_(block+1)``
    * ``diff = p_(1) - p_(block+1)``

    When the block is all of ``1..k`` there is no ``p_(block+1)``: ``diff``
    is NaN and ``y`` equals ``z``.
    """

    rules: RuleSet
    weights: np.ndarray
    stop_reason: StopReason
    order: tuple[int, ...]
    block: int
    z: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    diff: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.weights.shape[1] - 1

    @property
    def n_steps(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def final(self) -> Distribution:
        return self.step(self.n_steps)

    def step(self, n: int) -> Distribution:
        return Distribution(self.k, tuple(self.weights[n].tolist()))

    @property
    def steps(self) -> list[Distribution]:
        return [self.step(n) for n in range(self.weights.shape[0])]

    def csv_header(self) -> str:
        cols = ["n"] + [f"p{i}" for i in range(1, self.k + 1)] + ["p_empty", "z", "y", "diff"]
        return ",".join(cols)

    def to_csv(self) -> str:
        lines = [self.csv_header()]
        for n, row in enumerate(self.weights):
            vals = [format_float(v) for v in row]
            vals += [format_float(self.z[n]), format_float(self.y[n]), format_float(self.diff[n])]
            lines.append(f"{n}," + ",".join(vals))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        def clean(a):
            return [None if math.isnan(v) else v for v in a.tolist()]

        return {
            "k": self.k,
            "rules": str(self.rules),
            "stop_reason": self.stop_reason.value,
            "n_steps": self.n_steps,
            "order": [i + 1 for i in self.order],
            "block": self.block,
            "steps": self.weights.tolist(),
            "z": clean(self.z),
            "y": clean(self.y),
            "diff": clean(self.diff),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _diagnostics(weights: np.ndarray, order: np.ndarray, block: int):
    k = weights.shape[1] - 1
    ranked = weights[:, order]
    empty = weights[:, k]
    z = empty - ranked[:, 1:].sum(axis=1)
    if block < k:
        others = [j for j in range(1, k) if j != block]
        y = empty - ranked[:, others].sum(axis=1)
        diff = ranked[:, 0] - ranked[:, block]
    else:
        y = z.copy()
        diff = np.full(weights.shape[0], np.nan)
    return z, y, diff


def _run(x: np.ndarray, rules: RuleSet, k: int, n_max: int, conv_tol: float, out: np.ndarray):
    code, q, arity, table = kernel_params(rules, k)
    taken, status = kernels.run_map(x, out, code, q, arity, table, n_max, conv_tol)
    if status == kernels.STATUS_RENORM_FAILED:
        raise RenormalizationError(f"{rules} map left the simplex after {taken} steps")
    return taken, status == kernels.STATUS_CONVERGED


def iterate(
    d0: Distribution,
    rules: RuleSet = Standard(),
    max_steps: int = DEFAULT_MAX_STEPS,
    conv_tol: float = DEFAULT_CONV_TOL,
    tie_tol: float = DEFAULT_TIE_TOL,
) -> TrajectoryRecord:
    """Apply the rule's map until successive states differ by less than
    ``conv_tol`` in sup-norm, or ``max_steps`` times.

    ``conv_tol=0`` runs exactly ``max_steps`` steps. ``tie_tol`` only
    affects the block size used by the diagnostics.
    """
    _check(d0)
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if conv_tol < 0:
        raise ValueError("conv_tol must be >= 0")
    k1 = d0.k + 1
    x = d0.as_array()
    blocks = [x.reshape(1, k1)]
    remaining = max_steps
    chunk = min(_FIRST_CHUNK, max_steps)
    converged = False
    while remaining > 0:
        n = min(chunk, remaining)
        out = np.empty((n, k1))
        taken, converged = _run(x, rules, d0.k, n, conv_tol, out)
        blocks.append(out[:taken])
        remaining -= taken
        if converged:
            break
        x = out[taken - 1].copy()
        chunk = min(2 * chunk, _MAX_CHUNK)
    weights = np.concatenate(blocks)
    weights.setflags(write=False)
    order = _descending_order(d0)
    block, _, _ = max_infected_block(d0, tie_tol)
    z, y, diff = _diagnostics(weights, order, block)
    return TrajectoryRecord(
        rules=rules,
        weights=weights,
        stop_reason=StopReason.CONVERGED if converged else StopReason.MAX_ITERATIONS,
        order=tuple(int(i) for i in order),
        block=block,
        z=z,
        y=y,
        diff=diff,
    )


def iterate_limit(
    d0: Distribution,
    rules: RuleSet = Standard(),
    max_steps: int = DEFAULT_MAX_STEPS,
    conv_tol: float = DEFAULT_CONV_TOL,
) -> tuple[Distribution, int, StopReason]:
    """Like :func:`iterate` but keeps only the last state (O(k) memory)."""
    _check(d0)
    out = np.empty((1, d0.k + 1))
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    taken, converged = _run(d0.as_array(), rules, d0.k, max_steps, conv_tol, out)
    reason = StopReason.CONVERGED if converged else StopReason.MAX_ITERATIONS
    return Distribution(d0.k, tuple(out[0].tolist())), taken, reason


def evolve(d0: Distribution, rules: RuleSet, n: int) -> Distribution:
    """Exact root law of a height-``n`` tree: the map applied ``n`` times."""
    if n < 0:
        raise ValueError("height must be >= 0")
    if n == 0:
        return _check(d0)
    return iterate_limit(d0, rules, max_steps=n, conv_tol=0.0)[0]


# ------------------------------------------------------------ closed forms


@dataclass(frozen=True)
class LimitClassification:
    """Predicted ``lim p(n)`` and the theorem case that gives it.

    ``case`` is one of ``Theorem1a``, ``Theorem1b(i=<i>)``,
    ``Theorem2a-{p1wins,p2wins,tie}``, ``Theorem2b-{p1wins,p2wins,tie}``,
    ``Theorem2c`` or ``Absorbing`` (a boundary vertex that the map fixes,
    outside the open simplex the theorems cover).
    """

    limit: Distribution
    case: str
    tie_tol: float
    block: int | None = None

    def to_dict(self) -> dict:
        out = {"case": self.case, "limit": list(self.limit.weights), "k": self.limit.k,
               "tie_tol": self.tie_tol}
        if self.block is not None:
            out["block"] = self.block
        return out


def _classify_standard(d0: Distribution, tie_tol: float) -> LimitClassification:
    k = d0.k
    if all(x == 0.0 for x in d0.infected):
        return LimitClassification(d0, "Absorbing", tie_tol)
    i, _, idx = max_infected_block(d0, tie_tol)
    w = [0.0] * (k + 1)
    for j in idx:
        w[j - 1] = 1.0 / (2 * i - 1)
    w[k] = (i - 1) / (2 * i - 1)
    case = "Theorem1a" if i == k else f"Theorem1b(i={i})"
    return LimitClassification(make_distribution(k, w), case, tie_tol, block=i)


def _classify_mutation(d0: Distribution, q: float, tie_tol: float) -> LimitClassification:
    if d0.k != 2:
        raise RuleError(f"closed-form limit for mutation rules needs k=2, got k={d0.k}")
    p1, p2, p3 = d0.weights
    if p1 == 0.0 and p2 == 0.0:
        return LimitClassification(d0, "Absorbing", tie_tol)
    gap = p1 - p2
    if abs(gap) <= tie_tol:
        side = "tie"
    else:
        side = "p1wins" if gap > 0 else "p2wins"
    if q > 0.5 + tie_tol:
        if side == "tie":
            c = (2 * q - 1) / (4 * q - 1)
            w = [c, c, 1.0 / (4 * q - 1)]
        else:
            w = [1.0, 0.0, 0.0] if side == "p1wins" else [0.0, 1.0, 0.0]
        case = f"Theorem2a-{side}"
    elif abs(q - 0.5) <= tie_tol:
        if side == "tie":
            w = [0.0, 0.0, 1.0]
        elif side == "p1wins":
            w = [gap, 0.0, 1.0 - gap]
        else:
            w = [0.0, -gap, 1.0 + gap]
        case = f"Theorem2b-{side}"
    else:
        if p3 == 0.0 and (p1 == 0.0 or p2 == 0.0):
            return LimitClassification(d0, "Absorbing", tie_tol)
        w = [0.0, 0.0, 1.0]
        case = "Theorem2c"
    return LimitClassification(make_distribution(2, w), case, tie_tol)


def classify_limit(
    d0: Distribution, rules: RuleSet = Standard(), tie_tol: float = DEFAULT_TIE_TOL
) -> LimitClassification:
    """Closed-form limit of ``p(n)`` for standard (any k) or mutation (k=2) rules.

    Entries within ``tie_tol`` of each other count as tied; exact ties are
    what the theorems mean, so inputs closer than ``tie_tol`` but not equal
    may iterate to a different limit than the one predicted.
    """
    _check(d0)
    if tie_tol < 0:
        raise ValueError("tie_tol must be nonnegative")
    if isinstance(rules, Standard):
        return _classify_standard(d0, tie_tol)
    if isinstance(rules, Mutation):
        return _classify_mutation(d0, rules.q, tie_tol)
    raise RuleError(f"no closed form for {rules} rules")


# -------------------------------------------------------- convergence rate


@dataclass(frozen=True)
class ConvergenceReport:
    z0: float
    initial: Distribution
    rows: list[tuple[int, float, float]]
    holds: bool

    def to_csv(self) -> str:
        lines = ["n,z,bound"]
        lines += [f"{n},{format_float(z)},{format_float(b)}" for n, z, b in self.rows]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "z0": self.z0,
            "initial": list(self.initial.weights),
            "holds": self.holds,
            "rows": [{"n": n, "z": z, "bound": b} for n, z, b in self.rows],
        }


def rate_initial(z0: float) -> Distribution:
    """A k=2 start with ``p_3 - p_2 = z0`` and ``p_1 > p_2``.

    ``p_2 = (1 - z0)/4``, ``p_3 = p_2 + z0``, ``p_1`` takes the rest, which
    is ``2 p_2``. The strict gap keeps ``z(n)`` above ``z0^(2^n)`` by a margin
    much larger than round-off.
    """
    if not 0.0 < z0 < 1.0:
        raise ValueError(f"z0 must lie in (0,1), got {z0!r}")
    p2 = (1.0 - z0) / 4.0
    p3 = p2 + z0
    p1 = 1.0 - p2 - p3
    if not p1 >= p2 > 0.0:
        raise ValueError(f"cannot realize z0={z0!r} with p_1 maximal")
    return make_distribution(2, [p1, p2, p3])


def lower_bounds(z0: float, steps: int) -> list[float]:
    """``z0^(2^n)`` for ``n = 0..steps`` by repeated squaring."""
    out = [z0]
    for _ in range(steps):
        out.append(out[-1] * out[-1])
    return out


def convergence_rate_experiment(z0: float, steps: int) -> ConvergenceReport:
    """Track ``z(n)`` under the standard map against the bound ``z(0)^(2^n)``."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    d0 = rate_initial(z0)
    if steps == 0:
        zs = [d0.empty - d0.weights[1]]
    else:
        zs = iterate(d0, Standard(), max_steps=steps, conv_tol=0.0).z.tolist()
    bounds = lower_bounds(z0, steps)
    rows = [(n, zs[n], bounds[n]) for n in range(steps + 1)]
    holds = all(z >= b - BOUND_EPS for _, z, b in rows)
    return ConvergenceReport(z0, d0, rows, holds)


def target_z0(n: int) -> float:
    """The ``z(0)`` whose squaring bound reaches exactly 1/2 after ``n`` steps."""
    return 2.0 ** (-(2.0 ** (-n)))


__all__ = [
    "DEFAULT_CONV_TOL",
    "DEFAULT_MAX_STEPS",
    "ConvergenceReport",
    "LimitClassification",
    "RenormalizationError",
    "SimplexError",
    "StopReason",
    "TrajectoryRecord",
    "apply_F",
    "apply_G",
    "apply_dary",
    "apply_map",
    "apply_table",
    "attractor_f",
    "attractor_g",
    "classify_limit",
    "convergence_rate_experiment",
    "evolve",
    "iterate",
    "iterate_limit",
    "lower_bounds",
    "raw_map",
    "rate_initial",
    "scalar_f",
    "scalar_g",
    "target_z0",
]
