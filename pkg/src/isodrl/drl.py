"""Worst-case excess risk over mean-one density-ratio sets, no shape constraint.

Two concrete uncertainty sets are solved exactly:

* bound-constrained ratios ``a <= w <= b``: a closed form in terms of the
  risk's empirical CDF, valid for arbitrary (tied) risk values;
* KL-constrained ratios ``E[w log w] <= rho`` with an optional hard cap
  ``w <= gamma``: the dual solution ``w = min(exp((R - nu)/lam - 1), gamma)``,
  with the normalizing ``nu`` recovered in closed form for each cap pattern
  and the multiplier ``lam`` found by bracketed root finding on the
  divergence, which is strictly decreasing in ``lam``.

``oracle_max`` is an independent numerical maximizer (LP / SLSQP) used to
cross-check the solvers; it accepts the same sets plus optional explicit
isotonic constraints.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from .core import (
    BoundsDual,
    BoundsSet,
    EmpiricalDistribution,
    ExcessRiskSolution,
    KLDivergenceSet,
    KLDualState,
    NumericFailure,
    OrderSpec,
    UncertaintySet,
    as_risk_values,
    comparable_pairs,
    expectation,
)

__all__ = [
    "UnboundedWeightError",
    "solve_bounds",
    "solve_kl",
    "solve",
    "oracle_max",
    "monotone_rearrangement_check",
]

# Smallest multiplier probed before declaring the divergence constraint slack.
LAMBDA_FLOOR = 1e-8
DIVERGENCE_TOL = 1e-8
NORMALIZATION_TOL = 1e-10


class UnboundedWeightError(NumericFailure):
    """The divergence budget exceeds what any capped reweighting can spend.

    Raised only for untruncated KL solves where the constraint cannot bind;
    supplying a finite cap turns this case into the bounds-form fallback.
    """


def _xlogx(w: np.ndarray) -> np.ndarray:
    out = np.zeros_like(w)
    pos = w > 0
    out[pos] = w[pos] * np.log(w[pos])
    return out


def solve_bounds(dist: EmpiricalDistribution, risk, a: float, b: float) -> ExcessRiskSolution:
    """Worst-case excess risk over ``{w : a <= w <= b, E[w] = 1}``.

    The maximizer puts weight ``a`` below a risk threshold, ``b`` above it,
    and an intermediate boundary weight on the threshold atom itself so the
    mean-one constraint holds exactly with tied risks.
    """
    if not (0.0 <= a < 1.0):
        raise ValueError(f"require 0 <= a < 1, got a={a}")
    if not (1.0 < b < math.inf):
        raise ValueError(f"require 1 < b < inf, got b={b}")
    r = as_risk_values(risk)
    m = dist.masses
    if r.size != dist.n:
        raise ValueError("risk length does not match atom count")

    values, inverse = np.unique(r, return_inverse=True)
    pmf = np.bincount(inverse, weights=m, minlength=values.size)
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0

    theta = (b - 1.0) / (b - a)
    # t* is the smallest attained CDF level at or above theta.
    idx = int(np.searchsorted(cdf, theta - 1e-12))
    t_star = float(cdf[idx])
    q_star = float(values[idx])
    p_at_q = float(pmf[idx])
    eta_star = a + ((b - a) * t_star - (b - 1.0)) / p_at_q

    w = np.where(r < q_star, a, np.where(r > q_star, b, eta_star))
    delta = float(np.dot(m, w * r) - np.dot(m, r))
    return ExcessRiskSolution(delta, w, BoundsDual(t_star, eta_star, q_star))


def _kl_weight_exponents(z_desc: np.ndarray, logm_desc: np.ndarray, m_desc: np.ndarray,
                         log_gamma: float, gamma: float) -> np.ndarray:
    """Log-weights solving E[min(exp((r - nu)/lam - 1), gamma)] = 1.

    ``z_desc = (r - max(r)) / lam`` in descending risk order. Scans the cap
    patterns (top-k atoms at the cap) and returns ``log w`` for the unique
    consistent pattern; the normalizer is recovered in closed form from the
    uncapped tail, keeping every intermediate quantity O(1) in magnitude.
    """
    n = z_desc.size
    # Suffix log-sum-exp of log(m) + z over the uncapped tail, L[k] for top-k capped.
    tail = np.logaddexp.accumulate((logm_desc + z_desc)[::-1])[::-1]
    capped_mass = np.concatenate(([0.0], np.cumsum(m_desc)))

    for k in range(n):
        free_mass = 1.0 if k == 0 else 1.0 - gamma * capped_mass[k]
        if free_mass <= 0.0:
            break
        c = math.log(free_mass) - tail[k]
        # Slack scales with |c|: atoms sitting at the cap boundary within
        # roundoff must not make every split inconsistent.
        tol = 1e-9 + 1e-13 * abs(c)
        if k > 0 and z_desc[k - 1] + c < log_gamma - tol:
            continue
        if z_desc[k] + c >= log_gamma + tol:
            continue
        out = np.minimum(z_desc + c, log_gamma)
        if k:
            out[:k] = log_gamma
        return out
    # All atoms at the cap is consistent only when gamma == 1.
    if gamma == 1.0:
        return np.zeros(n)
    raise NumericFailure("no consistent cap pattern while normalizing KL weights")


def solve_kl(dist: EmpiricalDistribution, risk, rho: float,
             gamma: float | None = None) -> ExcessRiskSolution:
    """Worst-case excess risk over ``{w : E[w log w] <= rho, 0 <= w <= gamma, E[w] = 1}``.

    The multiplier ``lam`` is bracketed by doubling and solved by Brent's
    method on the (strictly decreasing) divergence; the normalizer ``nu``
    is exact for each ``lam``. If the divergence constraint cannot bind at
    the floor multiplier, the cap alone is active and the problem reduces
    to the bound-constrained form with ``a = 0, b = gamma``; without a cap
    that supremum piles unbounded weight on the top risk atoms, reported as
    :class:`UnboundedWeightError`.
    """
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    if gamma is not None and gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    r = as_risk_values(risk)
    m = dist.masses
    if r.size != dist.n:
        raise ValueError("risk length does not match atom count")

    base = float(np.dot(m, r))
    if rho == 0.0 or np.ptp(r) == 0.0 or gamma == 1.0:
        w = np.ones_like(r)
        return ExcessRiskSolution(0.0, w, KLDualState(math.inf, float(np.min(r)), 0.0))

    order = np.argsort(-r, kind="stable")
    r_desc = r[order]
    m_desc = m[order]
    logm_desc = np.log(m_desc)
    r_max = r_desc[0]
    gam = math.inf if gamma is None else float(gamma)
    log_gamma = math.inf if gamma is None else math.log(gam)

    def weights_for(lam: float) -> tuple[np.ndarray, float]:
        z = (r_desc - r_max) / lam
        logw = _kl_weight_exponents(z, logm_desc, m_desc, log_gamma, gam)
        w_desc = np.exp(logw)
        div = float(np.dot(m_desc, w_desc * logw))
        return w_desc, div

    def divergence(lam: float) -> float:
        return weights_for(lam)[1]

    # The lam -> 0 limit piles the cap onto the top risk atoms: exactly the
    # bound-constrained solution with a = 0, b = gamma. Its divergence is
    # the largest reachable, so it decides whether the rho constraint binds.
    if gamma is None:
        argmax_mass = float(np.sum(m[r == np.max(r)]))
        div_max = math.log(1.0 / argmax_mass)
        if rho >= div_max:
            raise UnboundedWeightError(
                "rho exceeds the largest divergence reachable without truncation; "
                "supply a finite gamma"
            )
    else:
        limit = solve_bounds(dist, r, 0.0, gam)
        div_max = float(np.dot(m, _xlogx(limit.weights)))
        if rho >= div_max:
            return ExcessRiskSolution(limit.delta, limit.weights,
                                      KLDualState(0.0, 0.0, div_max))

    lam_lo = 1.0
    while divergence(lam_lo) <= rho:
        lam_lo *= 0.5
        if lam_lo < LAMBDA_FLOOR:
            raise NumericFailure(
                "KL multiplier collapsed below the floor while bracketing; "
                "rho is numerically indistinguishable from the divergence cap"
            )
    lam_hi = max(1.0, 2.0 * lam_lo)
    for _ in range(200):
        if divergence(lam_hi) < rho:
            break
        lam_hi *= 2.0
    else:
        raise NumericFailure("failed to bracket the KL multiplier from above")

    lam_star = optimize.brentq(lambda lam: divergence(lam) - rho,
                               lam_lo, lam_hi, xtol=1e-14, rtol=8.9e-16,
                               maxiter=300)
    w_desc, div = weights_for(lam_star)
    w = np.empty_like(w_desc)
    w[order] = w_desc

    norm_residual = abs(float(np.dot(m, w)) - 1.0)
    div_residual = abs(div - rho)
    if norm_residual > NORMALIZATION_TOL or div_residual > DIVERGENCE_TOL:
        raise NumericFailure(
            f"KL dual solve did not converge: |E[w]-1|={norm_residual:.3e}, "
            f"|divergence-rho|={div_residual:.3e}"
        )

    # Recover nu from the uncapped form w = exp((r - nu)/lam - 1).
    free = w_desc < gam - 1e-12 if gamma is not None else np.ones_like(w_desc, bool)
    i0 = int(np.argmax(free))
    nu = float(r_desc[i0] - lam_star * (math.log(w_desc[i0]) + 1.0))
    delta = float(np.dot(m, w * r) - base)
    return ExcessRiskSolution(delta, w, KLDualState(float(lam_star), nu, div))


def solve(dist: EmpiricalDistribution, risk, uset: UncertaintySet,
          gamma: float | None = None) -> ExcessRiskSolution:
    """Dispatch on the uncertainty-set variant, combining truncations.

    The effective cap is the smaller of the set's own truncation and the
    ``gamma`` argument; for bounds sets it tightens the upper bound ``b``.
    """
    caps = [c for c in (uset.truncation, gamma) if c is not None]
    cap = min(caps) if caps else None
    if isinstance(uset, BoundsSet):
        b_eff = uset.b if cap is None else min(uset.b, cap)
        if b_eff <= 1.0:
            # Cap at 1 pins every weight: only w == 1 is feasible.
            r = as_risk_values(risk)
            return ExcessRiskSolution(0.0, np.ones_like(r), None)
        return solve_bounds(dist, risk, uset.a, b_eff)
    if isinstance(uset, KLDivergenceSet):
        return solve_kl(dist, risk, uset.rho, cap)
    raise TypeError(f"unsupported uncertainty set: {type(uset).__name__}")


def monotone_rearrangement_check(solution: ExcessRiskSolution, risk,
                                 atol: float = 1e-8) -> bool:
    """True iff the weights are a nondecreasing function of the risk.

    Weights are averaged within risk-tie classes first, so arbitrary
    weight orderings inside a tie class do not count as violations.
    """
    r = as_risk_values(risk)
    w = solution.weights
    if r.size != w.size:
        raise ValueError("risk length does not match weight length")
    values, inverse = np.unique(r, return_inverse=True)
    counts = np.bincount(inverse, minlength=values.size)
    means = np.bincount(inverse, weights=w, minlength=values.size) / counts
    return bool(np.all(np.diff(means) >= -atol))


def _feasible(w, m, uset, cap, edges, tol=1e-7) -> bool:
    if np.any(w < -tol) or abs(float(np.dot(m, w)) - 1.0) > tol:
        return False
    if cap is not None and np.any(w > cap + tol):
        return False
    if isinstance(uset, BoundsSet):
        if np.any(w < uset.a - tol) or np.any(w > uset.b + tol):
            return False
    else:
        if float(np.dot(m, _xlogx(np.maximum(w, 0.0)))) > uset.rho + tol:
            return False
    return all(w[i] <= w[j] + tol for i, j in edges)


def oracle_max(dist: EmpiricalDistribution, risk, uset: UncertaintySet,
               order: OrderSpec | None = None, seed: int = 0,
               n_starts: int = 8) -> float:
    """Independent numerical maximizer of the excess risk, for verification.

    Optimizes ``E[wR] - E[R]`` over the feasible weights directly — LP for
    bound constraints, SLSQP from multiple feasible starts for KL — with
    the isotonic constraints, when an order is given, imposed explicitly as
    pairwise inequalities rather than via projection. Intended for small
    instances (n <= 16 or so).
    """
    r = as_risk_values(risk)
    m = dist.masses
    n = r.size
    edges = comparable_pairs(order) if order is not None else []
    base = float(np.dot(m, r))
    caps = [c for c in (uset.truncation,) if c is not None]
    cap = min(caps) if caps else None

    if isinstance(uset, BoundsSet):
        lo, hi = uset.a, uset.b if cap is None else min(uset.b, cap)
        if hi <= 1.0:
            return 0.0
        a_ub = None
        b_ub = None
        if edges:
            a_ub = np.zeros((len(edges), n))
            for row, (i, j) in enumerate(edges):
                a_ub[row, i] = 1.0
                a_ub[row, j] = -1.0
            b_ub = np.zeros(len(edges))
        res = optimize.linprog(-m * r, A_ub=a_ub, b_ub=b_ub,
                               A_eq=m[None, :], b_eq=[1.0],
                               bounds=[(lo, hi)] * n, method="highs")
        if not res.success:
            raise NumericFailure(f"bounds oracle LP failed: {res.message}")
        return float(np.dot(m * r, res.x)) - base

    if not isinstance(uset, KLDivergenceSet):
        raise TypeError(f"unsupported uncertainty set: {type(uset).__name__}")

    rho = uset.rho
    if rho == 0.0:
        return 0.0
    hi = cap if cap is not None else max(50.0, 2.0 / float(np.min(m)))

    constraints = [
        {"type": "eq", "fun": lambda w: float(np.dot(m, w)) - 1.0,
         "jac": lambda w: m},
        {"type": "ineq", "fun": lambda w: rho - float(np.dot(m, _xlogx(np.maximum(w, 1e-300)))),
         "jac": lambda w: -m * (np.log(np.maximum(w, 1e-12)) + 1.0)},
    ]
    for i, j in edges:
        constraints.append({
            "type": "ineq",
            "fun": (lambda w, i=i, j=j: w[j] - w[i]),
            "jac": (lambda w, i=i, j=j: np.eye(n)[j] - np.eye(n)[i]),
        })

    rng = np.random.default_rng(seed)
    starts = [np.ones(n)]
    for _ in range(n_starts - 1):
        u = rng.uniform(0.2, 2.0, size=n)
        u /= float(np.dot(m, u))
        # Blend toward the uniform ratio until the divergence budget holds.
        t = 1.0
        while t > 1e-3 and float(np.dot(m, _xlogx(1.0 + t * (u - 1.0)))) > 0.9 * rho:
            t *= 0.5
        starts.append(1.0 + t * (u - 1.0))

    best = 0.0  # w == 1 is always feasible
    for x0 in starts:
        res = optimize.minimize(
            lambda w: -float(np.dot(m * r, w)), x0, jac=lambda w: -m * r,
            constraints=constraints, bounds=[(1e-12, hi)] * n,
            method="SLSQP", options={"maxiter": 500, "ftol": 1e-12},
        )
        if res.x is not None and _feasible(res.x, m, uset, cap, edges):
            best = max(best, float(np.dot(m * r, res.x)) - base)
    return best
