"""Closed-form rate quantities: effective sparsity and aggregation rates."""

import math

from .errors import ConfigError

__all__ = ["effective_sparsity", "aggregation_rate"]


def effective_sparsity(q, k, p, n):
    """Ceiling of the largest x in [0, p] with x <= k (n / ln(ep/x))^(q/2).

    Reduces weak-lq radius k to an equivalent exact sparsity level; at
    q = 0 this is just min(k, p).  Solved by monotone bisection on
    x - k (n / ln(ep/x))^(q/2) to absolute tolerance 1e-9.
    """
    if not 0.0 <= q <= 1.0:
        raise ConfigError(f"q must lie in [0, 1], got {q}")
    if p < 1 or n < 1:
        raise ConfigError("p and n must be >= 1")
    if k < 0:
        raise ConfigError(f"k must be >= 0, got {k}")
    if k == 0:
        return 0
    if q == 0.0:
        return int(math.ceil(min(float(k), float(p))))

    def gap(x):
        return x - k * (n / math.log(math.e * p / x)) ** (q / 2.0)

    if gap(float(p)) <= 0:
        return p
    lo = 1e-12
    if gap(lo) > 0:
        return 0
    # gap dips below zero immediately, then rises through zero exactly
    # once, so bisection brackets the unique positive crossing
    hi = float(p)
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if gap(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return int(min(p, math.ceil(lo)))


def aggregation_rate(theta_class, n, p, r, s_star=None):
    """Benchmark rate for one aggregation class.

    Classes: ``MS`` (model selection), ``C`` (convex), ``L`` (linear),
    ``Ls`` (sparse linear), ``Cs`` (sparse convex).
    """
    if n < 1 or p < 1 or r < 1:
        raise ConfigError("n, p, r must be >= 1")
    if r > min(n, p):
        raise ConfigError(f"r={r} cannot exceed min(n, p)={min(n, p)}")
    if theta_class == "MS":
        return math.log(p) / n
    if theta_class == "C":
        return math.sqrt(math.log(1.0 + p / math.sqrt(n)) / n)
    if theta_class == "L":
        return r / n
    if theta_class in ("Ls", "Cs"):
        if s_star is None or s_star < 1:
            raise ConfigError(f"class {theta_class} needs s_star >= 1")
        sparse = s_star * math.log(math.e * p / s_star) / n
        if theta_class == "Ls":
            return sparse
        return min(sparse, aggregation_rate("C", n, p, r))
    raise ConfigError(f"unknown aggregation class {theta_class!r}")
