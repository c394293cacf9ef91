"""Log of the Gaussian-Laplace integral over R^d.

Computes ln N(d, m, lam) with N = integral of
exp(-||t - y||^2 / 2 - lam ||t||) dt, which depends on the shift y only
through m = ||y||.  This is the only integral exact posterior weights
need: after projecting data onto a design's column span, every marginal
likelihood reduces to one call.

Evaluation paths: d = 1 uses the two-sided error-function closed form;
d = 2 and d = 3 use closed-form angular kernels under a radial
quadrature; for general d the angular integral over t = cos(theta) with
weight (1 - t^2)^((d-3)/2) is evaluated by node-doubling Gauss-Jacobi
quadrature, and the radial integral by adaptive Gauss-Legendre panels
split at the integrand's log-mode, all in log space with the peak
subtracted.
"""

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln, ive, log_ndtr, roots_jacobi

from .errors import ConfigError

__all__ = ["log_radial_integral"]

_LOG_2PI = math.log(2.0 * math.pi)
_PANEL_TOL = 1e-12
_MAX_DEPTH = 40
_JACOBI_CROSSOVER = 200.0


def log_radial_integral(d, m, lam):
    """ln of the d-dimensional Gaussian-Laplace integral at shift norm m."""
    d = int(d)
    if d < 1:
        raise ConfigError(f"dimension must be >= 1, got {d}")
    m = float(m)
    if m < 0 or not math.isfinite(m):
        raise ConfigError(f"shift norm must be finite and >= 0, got {m}")
    lam = float(lam)
    if lam < 0 or not math.isfinite(lam):
        raise ConfigError(f"lam must be finite and >= 0, got {lam}")
    if lam == 0.0:
        return 0.5 * d * _LOG_2PI
    if d == 1:
        return _closed_form_1d(m, lam)
    return _radial_quadrature(d, m, lam)


def _closed_form_1d(m, lam):
    # split the axis at 0 and complete the square on each side
    right = -lam * m + log_ndtr(m - lam)
    left = lam * m + log_ndtr(-m - lam)
    return 0.5 * _LOG_2PI + 0.5 * lam * lam + np.logaddexp(right, left)


@lru_cache(maxsize=64)
def _leggauss_cached(n):
    nodes, weights = leggauss(n)
    return nodes, weights


@lru_cache(maxsize=256)
def _jacobi_cached(n, alpha):
    nodes, weights = roots_jacobi(n, alpha, alpha)
    return nodes, weights


def _log_sphere_surface(dim):
    """ln of the surface measure of the unit sphere in R^dim."""
    return math.log(2.0) + 0.5 * dim * math.log(math.pi) - gammaln(0.5 * dim)


def _log_sinhc(x):
    """ln(sinh(x) / x), elementwise and overflow-safe."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    tiny = x < 1e-6
    out[tiny] = np.log1p(x[tiny] ** 2 / 6.0)
    mid = (~tiny) & (x < 30.0)
    out[mid] = np.log(np.sinh(x[mid])) - np.log(x[mid])
    big = x >= 30.0
    out[big] = x[big] - np.log(2.0 * x[big]) + np.log1p(-np.exp(-2.0 * x[big]))
    return out


def _log_angular(d, x):
    """ln of the surface integral of exp(x * cos(theta)) over S^(d-1)."""
    x = np.asarray(x, dtype=float)
    if d == 2:
        return _LOG_2PI + x + np.log(ive(0, x))
    if d == 3:
        return math.log(4.0 * math.pi) + _log_sinhc(x)
    # beyond the crossover the Gauss-Jacobi node count would grow with x;
    # switch to the modified-Bessel closed form of the same kernel there
    out = np.empty_like(x)
    small = x <= _JACOBI_CROSSOVER
    if np.any(small):
        out[small] = _log_sphere_surface(d - 1) + _log_angular_jacobi(d, x[small])
    if np.any(~small):
        xb = x[~small]
        nu = 0.5 * d - 1.0
        out[~small] = (
            0.5 * d * _LOG_2PI + (1.0 - 0.5 * d) * np.log(xb) + xb + np.log(ive(nu, xb))
        )
    return out


def _log_angular_jacobi(d, x):
    """ln of the integral of e^{x t} (1 - t^2)^((d-3)/2) over [-1, 1].

    Node-doubling Gauss-Jacobi quadrature with the exact endpoint
    weight; the factor e^x is pulled out so every summand stays in
    [0, 1] regardless of how large x gets.
    """
    alpha = 0.5 * (d - 3)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = 32
    prev = None
    while True:
        nodes, weights = _jacobi_cached(n, alpha)
        expo = np.exp(x[:, None] * (nodes[None, :] - 1.0))
        vals = x + np.log(expo @ weights)
        if prev is not None:
            err = np.max(np.abs(np.expm1(vals - prev)))
            if err < 1e-12 or n >= 4096:
                break
        prev = vals
        n *= 2
    return vals


def _radial_mode(d, m, lam):
    """Stationary point estimates of the radial log-integrand."""
    # large-argument regime: angular kernel behaves like e^{r m}
    disc_hi = (m - lam) ** 2 + 4.0 * (d - 1)
    hi = 0.5 * ((m - lam) + math.sqrt(disc_hi))
    # small-argument regime: angular kernel is flat
    disc_lo = lam * lam + 4.0 * (d - 1)
    lo = 0.5 * (-lam + math.sqrt(disc_lo))
    return lo, hi


def _radial_quadrature(d, m, lam):
    def log_f(r):
        r = np.asarray(r, dtype=float)
        out = np.full_like(r, -np.inf)
        pos = r > 0
        rp = r[pos]
        vals = (
            (d - 1) * np.log(rp)
            - 0.5 * rp * rp
            - lam * rp
            - 0.5 * m * m
            + _log_angular(d, rp * m)
        )
        out[pos] = vals
        return out

    lo_mode, hi_mode = _radial_mode(d, m, lam)
    r_max = m + 12.0 + 3.0 * math.sqrt(d)
    splits = sorted({0.0, min(lo_mode, r_max), min(hi_mode, r_max), r_max})
    return _adaptive_log_integral(log_f, splits)


def _panel_value(log_f, a, b, n):
    nodes, weights = _leggauss_cached(n)
    half = 0.5 * (b - a)
    xs = 0.5 * (a + b) + half * nodes
    vals = log_f(xs) + np.log(weights * half)
    top = np.max(vals)
    if top == -np.inf:
        return -np.inf
    return top + math.log(np.sum(np.exp(vals - top)))


def _adaptive_log_integral(log_f, splits):
    stack = [
        (a, b, 0) for a, b in zip(splits[:-1], splits[1:]) if b > a
    ]
    accepted = []
    scale = -np.inf
    while stack:
        a, b, depth = stack.pop()
        coarse = _panel_value(log_f, a, b, 32)
        fine = _panel_value(log_f, a, b, 64)
        if fine == -np.inf and coarse == -np.inf:
            continue
        negligible = fine < scale + math.log(1e-18)
        if (
            depth >= _MAX_DEPTH
            or negligible
            or abs(np.expm1(min(coarse - fine, 500.0))) < _PANEL_TOL
        ):
            accepted.append(fine)
            scale = max(scale, fine)
            continue
        mid = 0.5 * (a + b)
        stack.append((a, mid, depth + 1))
        stack.append((mid, b, depth + 1))
    if not accepted:
        return -math.inf
    arr = np.sort(np.array(accepted))
    top = arr[-1]
    return float(top + math.log(math.fsum(np.exp(arr - top))))
