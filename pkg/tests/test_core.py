"""Data-model invariants and the constraint-graph construction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isodrl.core import (
    BoundsSet,
    ComponentwiseOrder,
    EmpiricalDistribution,
    KLDivergenceSet,
    RiskVector,
    ScoreOrder,
    comparable_pairs,
    expectation,
    make_uniform_distribution,
)


def test_make_uniform_examples():
    assert np.allclose(make_uniform_distribution(4).masses, [0.25, 0.25, 0.25, 0.25])
    assert np.allclose(make_uniform_distribution(1).masses, [1.0])
    assert abs(make_uniform_distribution(3).masses.sum() - 1.0) <= 1e-12


def test_make_uniform_rejects_zero():
    with pytest.raises(ValueError):
        make_uniform_distribution(0)


def test_distribution_invariants():
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.array([0.5, 0.5, 0.0]))
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.array([0.6, 0.6]))


def test_expectation_examples():
    assert expectation(make_uniform_distribution(4), RiskVector([1, 2, 3, 4])) == pytest.approx(2.5)
    assert expectation(make_uniform_distribution(2), [0.0, 0.0]) == 0.0
    d = EmpiricalDistribution(np.array([0.9, 0.1]))
    assert expectation(d, [0.0, 10.0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        expectation(make_uniform_distribution(3), [1.0, 2.0])


def test_risk_vector_bound():
    RiskVector([0.5, -0.5], bound=1.0)
    with pytest.raises(ValueError):
        RiskVector([2.0, 0.0], bound=1.0)


def test_uncertainty_set_validation():
    BoundsSet(0.0, 2.0)
    with pytest.raises(ValueError):
        BoundsSet(1.0, 2.0)
    with pytest.raises(ValueError):
        BoundsSet(0.5, 1.0)
    with pytest.raises(ValueError):
        BoundsSet(0.0, 2.0, truncation=0.5)
    with pytest.raises(ValueError):
        KLDivergenceSet(-0.1)
    KLDivergenceSet(0.0, truncation=1.0)


def test_comparable_pairs_examples():
    assert comparable_pairs(ScoreOrder([1, 2, 3])) == [(0, 1), (1, 2)]
    assert comparable_pairs(ScoreOrder([2, 2])) == [(0, 1), (1, 0)]
    assert comparable_pairs(ComponentwiseOrder([[0, 0], [1, 0], [0, 1]])) == [(0, 1), (0, 2)]


def test_comparable_pairs_antichain_is_empty():
    assert comparable_pairs(ComponentwiseOrder([[0, 1], [1, 0]])) == []


def _tie_collapsed_graph(edges):
    # Contract nodes linked in both directions, return one-directional edges.
    both = {(i, j) for i, j in edges if (j, i) in set(edges)}
    parent = {}

    def find(i):
        parent.setdefault(i, i)
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in both:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    return {(find(i), find(j)) for i, j in edges if (j, i) not in set(edges)}


def _is_acyclic(nodes, arcs):
    succ = {u: [] for u in nodes}
    for u, v in arcs:
        succ.setdefault(u, []).append(v)
    state = {}

    def dfs(u):
        state[u] = 1
        for v in succ.get(u, []):
            if state.get(v) == 1:
                return False
            if state.get(v) is None and not dfs(v):
                return False
        state[u] = 2
        return True

    return all(state.get(u) == 2 or dfs(u) for u in succ)


@given(st.lists(st.integers(min_value=-5, max_value=5), min_size=1, max_size=12))
def test_score_pairs_acyclic_after_tie_collapse(scores):
    edges = comparable_pairs(ScoreOrder(np.asarray(scores, dtype=float)))
    arcs = _tie_collapsed_graph(edges)
    assert _is_acyclic(set(range(len(scores))), arcs)


@given(st.lists(st.floats(min_value=-100, max_value=100, allow_nan=False), min_size=2,
                max_size=12, unique=True))
def test_distinct_scores_give_sorted_adjacency_chain(scores):
    edges = comparable_pairs(ScoreOrder(scores))
    idx = np.argsort(scores)
    assert edges == [(int(idx[k]), int(idx[k + 1])) for k in range(len(scores) - 1)]


@settings(deadline=None)
@given(st.integers(min_value=1, max_value=9), st.integers(min_value=1, max_value=3),
       st.integers(min_value=0, max_value=10_000))
def test_componentwise_edges_encode_exactly_the_dominance_relation(n, d, seed):
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 3, size=(n, d)).astype(float)
    edges = comparable_pairs(ComponentwiseOrder(pts))

    # Transitive closure of the returned edges.
    reach = np.eye(n, dtype=bool)
    for i, j in edges:
        reach[i, j] = True
    for _ in range(n):
        reach = reach | (reach @ reach)

    dominated = np.ones((n, n), dtype=bool)
    for k in range(d):
        dominated &= pts[:, k][:, None] <= pts[:, k][None, :]

    assert np.array_equal(reach | np.eye(n, dtype=bool), dominated | np.eye(n, dtype=bool))
