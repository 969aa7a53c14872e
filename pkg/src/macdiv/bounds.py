"""Closed-form bounds on the expected sum capacity, in nats.

All bounds take the same exact-quantile threshold u_k that the simulator
uses (via ``evt.threshold_for_rate``), so bound/Monte-Carlo sandwiches
compare like with like.  The number of users above the threshold enters
through a selectable count law (exact Binomial by default, classical
Poisson limit on request); the finite-sample Gumbel constants supply
conditional norm means and stage maxima.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import evt
from .mathcore import (
    EULER_GAMMA,
    DomainError,
    digamma,
    inv_reg_gamma_q,
    log_exp1,
    log_reg_gamma_q,
)


@dataclass(frozen=True)
class BoundCurve:
    """A named bound evaluated on a grid of target exceedance rates."""
    points: list  # (k, value) pairs
    meta: dict    # K, r, P, bound_name


def poisson_weight(j, k):
    """e^-k k^j / j!, the probability that exactly j users exceed."""
    if j < 0 or k <= 0:
        raise DomainError("need j >= 0 and k > 0")
    return math.exp(j * math.log(k) - k - math.lgamma(j + 1))


def binomial_weight(j, k, K):
    """Exact probability that j of K users exceed a rate-k threshold."""
    if j < 0 or j > K or k <= 0 or k > K:
        raise DomainError("need 0 <= j <= K and 0 < k <= K")
    p = k / K
    if p >= 1.0:
        return 1.0 if j == K else 0.0
    logc = math.lgamma(K + 1) - math.lgamma(j + 1) - math.lgamma(K - j + 1)
    return math.exp(logc + j * math.log(p) + (K - j) * math.log1p(-p))


def _count_weight(j, k, K, count_law):
    """Probability of j exceedances under the chosen count law.

    The number of users above a rate-k threshold is Binomial(K, k/K)
    exactly; "poisson" is its large-K limit e^-k k^j/j!.  The exact law
    is the default because the Poisson surrogate stops bracketing the
    simulation once k/K is no longer small (visible already at K = 30),
    while for K >> k the two agree to within a percent.
    """
    if count_law == "binomial":
        return binomial_weight(j, k, K)
    if count_law == "poisson":
        return poisson_weight(j, k)
    raise DomainError(f"unknown count law {count_law!r}")


def zf_upper(k, K, r, P, count_law="binomial"):
    """Upper bound for single-threshold ZF decoding.

    sum_j w(j) * j * log(1 + (P/r)(r - j + 1)(u_k + a)), with u_k the
    exact-quantile threshold and a the finite-sample Gumbel scale:
    u_k + a is the mean norm above threshold and (r - j + 1)/r the
    dimension fraction the null-space projection keeps.  w is the
    exceedance-count law (see ``_count_weight``).
    """
    u = evt.threshold_for_rate(K, k, r)
    a = evt.fast_constants(K, r).a
    total = 0.0
    for j in range(1, r + 1):
        total += _count_weight(j, k, K, count_law) * j * math.log1p((P / r) * (r - j + 1) * (u + a))
    return total


def claim2_series(r, c):
    """The beta-weighted log integral (r-1) * int (1-a)^(r-2) log(1+c*a) da.

    Closed form ((1+c)/c)^(r-1) log(1+c) - sum_i ((1+c)/c)^i / (r-1-i);
    that expression cancels catastrophically for small c, so below c = 1
    the equal backward recurrence on A_t = int (1-a)^t/(1+c*a) da is used
    instead (contraction factor c/(1+c) < 1/2 there).

    The c -> 0+ limit is 0; c <= 0 is a domain error.
    """
    if r < 2:
        raise DomainError("series form needs r >= 2")
    if not (np.isfinite(c) and c > 0):
        raise DomainError("c must be positive (limit value at 0+ is 0)")
    if c >= 1.0:
        g = (1.0 + c) / c
        total = g ** (r - 1) * math.log1p(c)
        for i in range(r - 1):
            total -= g ** i / (r - 1 - i)
        return total
    # backward recurrence: A_{t-1} = (c A_t + 1/t) / (1+c), target = c * A_{r-1}
    t_start = r - 1 + 64
    a_t = 1.0 / (t_start + 1)  # crude start; error contracts by (c/(1+c))^64
    for t in range(t_start, r - 1, -1):
        a_t = (c * a_t + 1.0 / t) / (1.0 + c)
    return c * a_t


def zf_lower(k, K, r, P, count_law="binomial"):
    """Lower bound for single-threshold ZF decoding.

    (sum_j w(j) * j) times the angle integral of log(1 + P u_k a)
    against the Beta(1, r-1) angle density.  r = 1 has no interfering
    direction, so the integral degenerates to log(1 + P u_k).  With the
    exact count law this chain of inequalities holds at any K.
    """
    u = evt.threshold_for_rate(K, k, r)
    weight = sum(_count_weight(j, k, K, count_law) * j for j in range(1, r + 1))
    if u == 0.0:
        return 0.0
    if r == 1:
        return weight * math.log1p(P * u)
    return weight * claim2_series(r, P * u)


def sic_upper(K, r, P):
    """Upper bound for the multi-threshold SIC algorithm.

    Stage l of the selection takes the maximum of K projected gains that
    are chi-square with 2(r - l + 1) degrees of freedom, so its mean is
    at most the Gumbel mean b + gamma*a at the stage constants.
    """
    if K < r or r < 1:
        raise DomainError("need K >= r >= 1")
    total = 0.0
    for l in range(1, r + 1):
        c = evt.fast_constants(K, r - l + 1)
        total += math.log1p(P * (c.b + EULER_GAMMA * c.a))
    return total


def sic_lower(K, r, P, paper_literal=False):
    """High-probability lower bound for the multi-threshold SIC algorithm.

    Stage thresholds are set so log K projected gains exceed on average,
    making a no-exceedance stage an O(1/K) event; the sum of
    log(1 + P u^(l)) then lower-bounds the capacity with high
    probability.  ``paper_literal`` reproduces the stated form verbatim:
    no power factor and the stage index shifted by one.
    """
    if K < max(r, 3):
        raise DomainError("need K >= r and K >= 3")
    rate = math.log(K)
    total = 0.0
    for l in range(1, r + 1):
        stage = (r - l + 2) if paper_literal else (r - l + 1)
        stage = min(stage, r)
        u_l = 2.0 * inv_reg_gamma_q(stage, rate / K)
        total += math.log1p(u_l if paper_literal else P * u_l)
    return total


def mmse_upper(k, K, r, P, count_law="binomial"):
    """Upper bound for single-threshold MMSE decoding.

    Same count mixture as the ZF bound but with the interference
    penalty (j-1) u_k^2 / [r((1+j/r)(u_k+a)^2 + a(a+1) + u_k)] applied
    to the conditional mean gain u_k + a.
    """
    u = evt.threshold_for_rate(K, k, r)
    a = evt.fast_constants(K, r).a
    total = 0.0
    for j in range(1, r + 1):
        denom = r * ((1.0 + j / r) * (u + a) ** 2 + a * (a + 1.0) + u)
        shrink = 1.0 - (j - 1) * u * u / denom
        total += _count_weight(j, k, K, count_law) * j * math.log1p(P * shrink * (u + a))
    return total


def cond_log_expectation_lb(r, j, u):
    """Lower bound on E[log(1 + x) | x + y > u] for independent chi-squares.

    x is chi-square with 2(r-j+1) degrees of freedom and y with 2(j-1),
    1 < j <= r, u > 0.  Written in terms of regularized upper gammas
    Q(s, u/2); the j = r corner needs Gamma(0, 1 + u/2), the exponential
    integral.
    """
    if not 1 < j <= r:
        raise DomainError("need 1 < j <= r")
    if not u > 0:
        raise DomainError("u must be positive")
    ratio, g, tail = _cond_lb_pieces(r, j, u)
    return (ratio + g) * math.log(u) + g * (digamma(r - j + 1) - digamma(r)) + tail


def _cond_lb_pieces(r, j, u):
    """The three ingredients of the conditional-log lower bound.

    Everything is a ratio against Q(r, u/2), evaluated in log space so
    thresholds far beyond the double-precision range of Q itself still
    work.  ``ratio + g`` is the log(u) coefficient; it tends to 1 as u
    grows (g -> 1 while ratio vanishes like u^(1-j)).
    """
    x = u / 2.0
    lq_r = log_reg_gamma_q(r, x)
    g = math.exp(-x + (r - 1) * math.log(x) - math.lgamma(r) - lq_r)
    ratio = math.exp(log_reg_gamma_q(r - j + 1, x) - lq_r)
    if j < r:
        tail = math.exp(1.0 + log_reg_gamma_q(r - j, 1.0 + x) - lq_r) / (r - j)
    else:
        tail = math.exp(1.0 + log_exp1(1.0 + x) - lq_r)
    return ratio, g, tail


def mmse_lower(k, K, r, count_law="binomial"):
    """Lower bound for single-threshold MMSE decoding at unit power.

    Count mixture of ``cond_log_expectation_lb`` over j = 2..r; the
    j = 1 term is dropped (its weight is negligible in the regime of
    interest) and the total is clamped at zero, which any capacity lower
    bound may be.
    """
    if r < 2:
        raise DomainError("needs r >= 2 (no interference term otherwise)")
    u = evt.threshold_for_rate(K, k, r)
    if u <= 0.0:
        return 0.0
    total = 0.0
    for j in range(2, r + 1):
        total += _count_weight(j, k, K, count_law) * j * cond_log_expectation_lb(r, j, u)
    return max(total, 0.0)


_BOUND_FNS = {
    "zf_upper": lambda k, K, r, P: zf_upper(k, K, r, P),
    "zf_lower": lambda k, K, r, P: zf_lower(k, K, r, P),
    "mmse_upper": lambda k, K, r, P: mmse_upper(k, K, r, P),
    "mmse_lower": lambda k, K, r, P: mmse_lower(k, K, r),
}


def bound_curve(name, K, r, P, k_values=None):
    """Evaluate a named k-dependent bound on a grid (default 0.25 steps)."""
    if name not in _BOUND_FNS:
        raise DomainError(f"unknown bound {name!r}")
    if k_values is None:
        k_values = np.arange(0.25, min(8.0, K) + 1e-9, 0.25)
    fn = _BOUND_FNS[name]
    pts = [(float(k), float(fn(k, K, r, P))) for k in k_values]
    return BoundCurve(points=pts, meta={"K": K, "r": r, "P": P, "bound_name": name})
