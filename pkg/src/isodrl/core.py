"""Shared data model for worst-case risk evaluation on weighted samples.

Everything downstream works on a finite sample: an empirical distribution
(atoms with positive masses summing to one), a vector of per-atom risk
values, a description of the admissible density-ratio reweightings
(bound-constrained or KL-constrained), and a partial preorder on the atoms
that defines which reweightings count as isotonic.

All containers are plain dataclasses wrapping numpy arrays. They validate
their invariants at construction time and are treated as immutable
afterwards; nothing in this package mutates them in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "NumericFailure",
    "EmpiricalDistribution",
    "RiskVector",
    "BoundsSet",
    "KLDivergenceSet",
    "UncertaintySet",
    "ScoreOrder",
    "ComponentwiseOrder",
    "OrderSpec",
    "BoundsDual",
    "KLDualState",
    "ExcessRiskSolution",
    "make_uniform_distribution",
    "expectation",
    "comparable_pairs",
    "score_tie_classes",
    "as_risk_values",
]

# Mass normalization tolerance for empirical distributions.
MASS_ATOL = 1e-12


class NumericFailure(RuntimeError):
    """An iterative solver failed to reach its declared tolerance."""


def _as_1d_float(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass
class EmpiricalDistribution:
    """A finite distribution given by strictly positive atom masses.

    Masses must sum to one within ``MASS_ATOL``. The pipeline only ever
    produces uniform masses, but all solvers accept general positive
    masses so that weighted oracles can exercise them.
    """

    masses: np.ndarray

    def __post_init__(self):
        self.masses = _as_1d_float(self.masses, "masses")
        if np.any(self.masses <= 0):
            raise ValueError("all masses must be strictly positive")
        total = float(self.masses.sum())
        if abs(total - 1.0) > MASS_ATOL:
            raise ValueError(f"masses must sum to 1 within {MASS_ATOL}, got {total!r}")

    @property
    def n(self) -> int:
        return self.masses.size


def make_uniform_distribution(n: int) -> EmpiricalDistribution:
    """Uniform empirical distribution with ``n`` atoms of mass ``1/n``."""
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return EmpiricalDistribution(np.full(n, 1.0 / n))


@dataclass
class RiskVector:
    """Per-atom risk values, optionally with a known uniform bound."""

    values: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        self.values = _as_1d_float(self.values, "values")
        if self.bound is not None:
            if self.bound < 0:
                raise ValueError("bound must be nonnegative")
            if np.any(np.abs(self.values) > self.bound):
                raise ValueError("all |values| must be <= bound")

    @property
    def n(self) -> int:
        return self.values.size


def as_risk_values(risk: Union["RiskVector", Sequence[float], np.ndarray]) -> np.ndarray:
    """Extract a plain value array from a RiskVector or array-like."""
    if isinstance(risk, RiskVector):
        return risk.values
    return _as_1d_float(risk, "risk")


def expectation(dist: EmpiricalDistribution, risk) -> float:
    """Mean of the risk values under the empirical distribution."""
    values = as_risk_values(risk)
    if values.size != dist.n:
        raise ValueError(
            f"risk length {values.size} does not match atom count {dist.n}"
        )
    return float(np.dot(dist.masses, values))


@dataclass
class BoundsSet:
    """Density ratios confined to ``a <= w <= b`` with mean one.

    Requires ``0 <= a < 1 < b``; otherwise the mean-one constraint is
    infeasible or degenerate. ``truncation`` is an optional extra cap
    ``w <= gamma`` applied by the empirical estimators.
    """

    a: float
    b: float
    truncation: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.a < 1.0):
            raise ValueError(f"require 0 <= a < 1, got a={self.a}")
        if not (1.0 < self.b < math.inf):
            raise ValueError(f"require 1 < b < inf, got b={self.b}")
        if self.truncation is not None and self.truncation < 1.0:
            raise ValueError("truncation must be >= 1 (mean-1 infeasible otherwise)")


@dataclass
class KLDivergenceSet:
    """Density ratios with ``E[w log w] <= rho`` and mean one.

    The f-divergence with ``f(x) = x log x``. ``truncation`` is the hard
    cap ``w <= gamma`` used by the empirical estimators.
    """

    rho: float
    truncation: float | None = None

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if self.truncation is not None and self.truncation < 1.0:
            raise ValueError("truncation must be >= 1 (mean-1 infeasible otherwise)")


UncertaintySet = Union[BoundsSet, KLDivergenceSet]


@dataclass
class ScoreOrder:
    """Total preorder induced by real scores: ``i <= j`` iff ``scores[i] <= scores[j]``.

    Atoms with equal scores form tie classes on which isotonic functions
    must be constant.
    """

    scores: np.ndarray

    def __post_init__(self):
        self.scores = _as_1d_float(self.scores, "scores")

    @property
    def n(self) -> int:
        return self.scores.size


@dataclass
class ComponentwiseOrder:
    """Partial order on points: ``i <= j`` iff ``points[i] <= points[j]`` coordinatewise."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.size == 0:
            raise ValueError(f"points must be a nonempty (n, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        self.points = pts

    @property
    def n(self) -> int:
        return self.points.shape[0]


OrderSpec = Union[ScoreOrder, ComponentwiseOrder]


def score_tie_classes(scores: np.ndarray) -> list[np.ndarray]:
    """Indices grouped by equal score, classes listed in increasing score order."""
    scores = np.asarray(scores, dtype=float)
    uniq, inverse = np.unique(scores, return_inverse=True)
    return [np.flatnonzero(inverse == k) for k in range(uniq.size)]


def _equality_chain(members: np.ndarray) -> list[tuple[int, int]]:
    # Paired edges between consecutive members force equality on the class.
    edges = []
    for u, v in zip(members[:-1], members[1:]):
        edges.append((int(u), int(v)))
        edges.append((int(v), int(u)))
    return edges


def _componentwise_pairs(points: np.ndarray) -> list[tuple[int, int]]:
    # Collapse exactly-equal points into tie classes, compute the strict
    # dominance relation on class representatives, and transitively reduce
    # it (edge u->v is redundant iff a two-step path u->z->v exists; the
    # relation is transitive so two steps suffice).
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    classes = [np.flatnonzero(inverse == k) for k in range(uniq.shape[0])]
    reps = np.array([int(c[0]) for c in classes])

    edges: list[tuple[int, int]] = []
    for c in classes:
        edges.extend(_equality_chain(c))

    k = uniq.shape[0]
    if k > 1:
        leq = np.ones((k, k), dtype=bool)
        for j in range(uniq.shape[1]):
            col = uniq[:, j]
            leq &= col[:, None] <= col[None, :]
        np.fill_diagonal(leq, False)  # rows are distinct, so <= means strict
        two_step = (leq.astype(np.uint8) @ leq.astype(np.uint8)) > 0
        reduced = leq & ~two_step
        for u, v in np.argwhere(reduced):
            edges.append((int(reps[u]), int(reps[v])))
    return sorted(set(edges))


def comparable_pairs(order: OrderSpec) -> list[tuple[int, int]]:
    """Transitively reduced constraint edges of the preorder.

    A vector ``w`` is isotonic for the order iff ``w[i] <= w[j]`` for every
    returned pair ``(i, j)``. Tie classes (equal scores, or exactly equal
    points) are encoded as paired edges in both directions, forcing
    equality.
    """
    if isinstance(order, ScoreOrder):
        classes = score_tie_classes(order.scores)
        edges: list[tuple[int, int]] = []
        for c in classes:
            edges.extend(_equality_chain(c))
        for prev, nxt in zip(classes[:-1], classes[1:]):
            edges.append((int(prev[0]), int(nxt[0])))
        return edges
    if isinstance(order, ComponentwiseOrder):
        return _componentwise_pairs(order.points)
    raise TypeError(f"unsupported order spec: {type(order).__name__}")


@dataclass
class BoundsDual:
    """Certificate for the bound-constrained solution: threshold and boundary weight."""

    t_star: float
    eta_star: float
    q_star: float


@dataclass
class KLDualState:
    """Dual certificate for the KL-constrained solution.

    ``lam`` and ``nu`` parameterize the optimal weights
    ``w = min(exp((R - nu)/lam - 1), gamma)``; ``divergence`` is
    ``E[w log w]`` at the solution. ``lam == 0`` marks the degenerate case
    where the divergence constraint is slack and the box constraints bind.
    """

    lam: float
    nu: float
    divergence: float


@dataclass
class ExcessRiskSolution:
    """Worst-case excess risk with the attaining weights and dual certificate."""

    delta: float
    weights: np.ndarray = field(repr=False)
    dual: BoundsDual | KLDualState | None = None

    def __post_init__(self):
        self.weights = _as_1d_float(self.weights, "weights")
        if np.any(self.weights < -1e-12):
            raise ValueError("weights must be nonnegative")
