"""Projection onto the isotonic cone: examples, oracles, and cone properties."""

import numpy as np
import pytest

from isodrl.core import (
    ComponentwiseOrder,
    EmpiricalDistribution,
    ScoreOrder,
    comparable_pairs,
    make_uniform_distribution,
)
from isodrl.isotonic import project_partial_order, project_pava

from _oracles import (
    project_chain_bruteforce,
    project_graph_bruteforce,
    project_graph_slsqp,
    random_masses,
)


def test_pava_examples():
    d3 = make_uniform_distribution(3)
    assert np.allclose(project_pava(d3, [1, 2, 3], [1, 2, 3]).projected, [1, 2, 3])
    assert np.allclose(project_pava(d3, [3, 1, 2], [1, 2, 3]).projected, [2, 2, 2])
    d4 = make_uniform_distribution(4)
    assert np.allclose(project_pava(d4, [1, 3, 2, 4], [1, 2, 3, 4]).projected,
                       [1, 2.5, 2.5, 4])
    assert np.allclose(project_pava(d3, [2, 0, 1], [1, 1, 2]).projected, [1, 1, 1])


def test_pava_examples_match_partition_oracle():
    d3 = make_uniform_distribution(3)
    d4 = make_uniform_distribution(4)
    for dist, values, scores in [
        (d3, [3.0, 1.0, 2.0], [1.0, 2.0, 3.0]),
        (d4, [1.0, 3.0, 2.0, 4.0], [1.0, 2.0, 3.0, 4.0]),
        (d3, [2.0, 0.0, 1.0], [1.0, 1.0, 2.0]),
    ]:
        oracle = project_chain_bruteforce(dist.masses, values, scores)
        assert np.allclose(project_pava(dist, values, scores).projected, oracle, atol=1e-12)


def test_partial_order_examples():
    d = make_uniform_distribution(2)
    res = project_partial_order(d, [2.0, 1.0], ComponentwiseOrder([[0, 0], [1, 1]]))
    assert np.allclose(res.projected, [1.5, 1.5], atol=1e-8)
    d3 = make_uniform_distribution(3)
    res = project_partial_order(d3, [2.0, 1.0, 1.0], ComponentwiseOrder([[0, 0], [1, 0], [0, 1]]))
    assert np.allclose(res.projected, [4 / 3, 4 / 3, 4 / 3], atol=1e-8)
    # Antichain: no comparable pairs, projection is the identity.
    res = project_partial_order(d, [5.0, -1.0], ComponentwiseOrder([[0, 1], [1, 0]]))
    assert np.allclose(res.projected, [5.0, -1.0])
    assert res.sse == 0.0


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        project_pava(make_uniform_distribution(3), [1.0, 2.0], [1.0, 2.0, 3.0])


def test_degenerate_constant_input():
    d = make_uniform_distribution(4)
    res = project_partial_order(d, [2.0] * 4, ComponentwiseOrder(np.eye(4)[:, :2]))
    assert np.array_equal(res.projected, [2.0] * 4)
    assert res.sse == 0.0


def test_monotone_invariance_of_scores():
    rng = np.random.default_rng(7)
    d = make_uniform_distribution(15)
    values = rng.normal(size=15)
    scores = rng.normal(size=15)
    base = project_pava(d, values, scores).projected
    for transform in (lambda s: 3.0 * s + 2.0, np.exp, lambda s: s**3):
        assert np.array_equal(project_pava(d, values, transform(scores)).projected, base)


def _random_chain_instance(rng, max_n=12):
    n = int(rng.integers(2, max_n + 1))
    masses = random_masses(rng, n, uniform=bool(rng.integers(0, 2)))
    values = rng.normal(size=n) * rng.uniform(0.5, 3.0)
    # Coarse scores produce ties with sizeable probability.
    scores = rng.integers(0, n, size=n).astype(float)
    return EmpiricalDistribution(masses), values, scores


def test_pava_matches_partition_oracle_randomized():
    rng = np.random.default_rng(123)
    for _ in range(200):
        dist, values, scores = _random_chain_instance(rng)
        got = project_pava(dist, values, scores).projected
        want = project_chain_bruteforce(dist.masses, values, scores)
        assert np.allclose(got, want, atol=1e-9)


def _random_points_instance(rng, max_n=9):
    n = int(rng.integers(2, max_n + 1))
    d = int(rng.integers(1, 4))
    pts = rng.integers(0, 3, size=(n, d)).astype(float)
    masses = random_masses(rng, n, uniform=bool(rng.integers(0, 2)))
    values = rng.normal(size=n) * rng.uniform(0.5, 3.0)
    return EmpiricalDistribution(masses), values, ComponentwiseOrder(pts)


def test_partial_order_matches_qp_oracles_randomized():
    rng = np.random.default_rng(42)
    checked_enum = 0
    for _ in range(120):
        dist, values, order = _random_points_instance(rng)
        got = project_partial_order(dist, values, order).projected
        edges = comparable_pairs(order)
        want = project_graph_slsqp(dist.masses, values, edges)
        assert np.allclose(got, want, atol=2e-6)
        if len(edges) <= 12:
            exact = project_graph_bruteforce(dist.masses, values, edges)
            assert np.allclose(got, exact, atol=1e-7)
            checked_enum += 1
    assert checked_enum >= 30


def test_projection_properties_randomized():
    rng = np.random.default_rng(5)
    for _ in range(60):
        dist, values, order = _random_points_instance(rng)
        m = dist.masses
        res = project_partial_order(dist, values, order)
        p = res.projected

        # Isotonic feasibility on every comparable pair.
        for i, j in comparable_pairs(order):
            assert p[i] <= p[j] + 1e-10

        # Idempotence.
        again = project_partial_order(dist, p, order).projected
        assert np.allclose(again, p, atol=1e-8)

        # Orthogonality and mean preservation under the projection measure.
        assert abs(float(np.dot(m, (values - p) * p))) <= 1e-7
        assert abs(float(np.dot(m, p)) - float(np.dot(m, values))) <= 1e-10

        # Nonexpansiveness against a second input.
        other = values + rng.normal(size=values.size)
        q = project_partial_order(dist, other, order).projected
        lhs = float(np.dot(m, (p - q) ** 2))
        rhs = float(np.dot(m, (values - other) ** 2))
        assert lhs <= rhs + 1e-8


def test_sse_reported():
    d = make_uniform_distribution(3)
    res = project_pava(d, [3.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    want = np.dot(d.masses, (np.array([3.0, 1.0, 2.0]) - 2.0) ** 2)
    assert res.sse == pytest.approx(want)
