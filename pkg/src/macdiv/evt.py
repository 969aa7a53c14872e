"""Extreme-value constants and threshold design for chi-square channel gains.

Squared channel norms are chi-square with 2r degrees of freedom (the
Gamma(r, beta=2) convention used across the whole package), so maxima of
K i.i.d. gains converge to a Gumbel law.  The two constant families are
the asymptotic pair (scale 2, logarithmic location) and the
finite-sample quantile/hazard pair, which is far more accurate at
moderate K and drives every threshold here.
"""

import math
from dataclasses import dataclass

from .mathcore import EULER_GAMMA, DomainError, inv_reg_gamma_q, reg_gamma_q


@dataclass(frozen=True)
class EvtConstants:
    """Gumbel/GEV normalizing constants: scale a, location b, shape xi."""
    a: float
    b: float
    xi: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("scale a must be positive")


@dataclass(frozen=True)
class ThresholdPolicy:
    """Threshold u on the squared channel norm plus the rate that set it."""
    u: float
    k_target: float
    K: int
    r: int

    def __post_init__(self):
        if self.u < 0:
            raise DomainError("threshold must be nonnegative")
        if not 0 < self.k_target <= self.K:
            raise DomainError("k_target must lie in (0, K]")


def slow_constants(n, r):
    """Asymptotic Gumbel constants: a = 2, b = 2(log n + (r-1)loglog n - log Gamma(r)).

    Requires n >= 3 so the iterated logarithm is defined.
    """
    if n < 3:
        raise DomainError("n must be at least 3 for the iterated logarithm")
    if r < 1:
        raise DomainError("r must be a positive integer")
    b = 2.0 * (math.log(n) + (r - 1) * math.log(math.log(n)) - math.lgamma(r))
    return EvtConstants(a=2.0, b=b)


def fast_constants(n, r):
    """Finite-sample Gumbel constants from the 1 - 1/n quantile and hazard.

    b = 2 Q^-1(r, 1/n); a = (2/n) Gamma(r) exp(Q^-1(r, 1/n)) Q^-1(r, 1/n)^(1-r).
    For r = 1 this reduces exactly to a = 2, b = 2 log n.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    if r < 1:
        raise DomainError("r must be a positive integer")
    if r == 1:
        # algebraic reduction: Q^-1(1, 1/n) = log n makes a exactly 2
        return EvtConstants(a=2.0, b=2.0 * math.log(n))
    q = inv_reg_gamma_q(r, 1.0 / n)
    b = 2.0 * q
    # evaluate through logs; Gamma(r) and q^(1-r) overflow separately for large r
    log_a = math.log(2.0) - math.log(n) + math.lgamma(r) + q + (1.0 - r) * math.log(q)
    return EvtConstants(a=math.exp(log_a), b=b)


def threshold_for_rate(K, k, r):
    """Threshold on the squared norm exceeded by k of K users on average.

    Exact quantile form u = 2 Q^-1(r, k/K); K * Q(r, u/2) = k holds by
    construction.  k = K gives u = 0 (everyone transmits).
    """
    if not 0 < k <= K:
        raise DomainError(f"k must lie in (0, K], got k={k}, K={K}")
    return 2.0 * inv_reg_gamma_q(r, k / K)


def threshold_point_process(K, k, r):
    """Alternate threshold from the exceedance-rate form b - a log k.

    Agrees with ``threshold_for_rate`` asymptotically in K; exposed for
    comparison experiments only.
    """
    if not 0 < k <= K:
        raise DomainError(f"k must lie in (0, K], got k={k}, K={K}")
    c = fast_constants(K, r)
    return max(c.b - c.a * math.log(k), 0.0)


def exceedance_intensity(v, xi):
    """Expected exceedances of level v under the limit point process.

    (1 + xi*v)_+^(-1/xi) for xi != 0, collapsing to exp(-v) at xi = 0.
    """
    if xi == 0.0:
        return math.exp(-v)
    base = 1.0 + xi * v
    if base <= 0.0:
        # (.)_+ clamp: empty set for xi > 0, full mass for xi < 0
        return 0.0 if xi > 0 else math.inf
    return base ** (-1.0 / xi)


def gumbel_stats(c):
    """Mean and CDF of the Gumbel law with the given constants.

    Only the xi = 0 family is supported (all chi-square maxima land
    there).  Mean is b + gamma*a with gamma the Euler constant; the CDF
    is exp(-exp(-(x - b)/a)).
    """
    if c.xi != 0.0:
        raise DomainError("only the Gumbel (xi = 0) family is supported")

    def cdf(x):
        import numpy as np
        return np.exp(-np.exp(-(np.asarray(x, dtype=float) - c.b) / c.a))

    return c.b + EULER_GAMMA * c.a, cdf


def conditional_excess_mean(u, c):
    """Mean squared norm given it exceeds u: threshold plus mean excess.

    The excess over a high threshold is exponential with mean a, so the
    conditional mean is u + a.
    """
    if c.xi != 0.0:
        raise DomainError("only the Gumbel (xi = 0) family is supported")
    return u + c.a


def policy_for_rate(K, k, r):
    """ThresholdPolicy built from the exact-quantile threshold."""
    return ThresholdPolicy(u=threshold_for_rate(K, k, r), k_target=float(k), K=int(K), r=int(r))


def exceedance_probability(u, r):
    """Per-user probability that a chi-square(2r) gain exceeds u."""
    return reg_gamma_q(r, u / 2.0)
