"""Radial integral: closed forms, quadrature oracles, Monte Carlo."""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln, ive

from structbayes import ConfigError, log_radial_integral

LOG_2PI = math.log(2.0 * math.pi)


def quad_oracle_1d(m, lam):
    # each half-axis has a Gaussian bump whose peak must be resolved, so
    # integrate the two sides separately in shifted-log form
    peak = max(-0.5 * (t - m) ** 2 - lam * abs(t) for t in (0.0, m - lam, m))
    f = lambda t: np.exp(-0.5 * (t - m) ** 2 - lam * abs(t) - peak)
    hi = m + lam + 40.0
    pos, _ = integrate.quad(
        f, 0.0, hi, points=[max(0.0, m - lam), m], epsabs=1e-15, epsrel=1e-13,
        limit=400,
    )
    neg, _ = integrate.quad(f, -hi, 0.0, epsabs=1e-15, epsrel=1e-13, limit=400)
    return peak + math.log(pos + neg)


def bessel_kernel_oracle(d, m, lam):
    """1-d quadrature with the modified-Bessel angular kernel throughout;
    an implementation independent of the package's panel scheme."""
    upper = m + 12.0 + 3.0 * math.sqrt(d)

    rs = np.linspace(1e-9, upper, 4001)
    def log_g(r):
        x = r * m
        if x < 1e-5:
            # large-order ive underflows at tiny arguments; the x -> 0
            # limit is the sphere surface with an O(x^2/d) correction
            ang = (
                math.log(2.0)
                + 0.5 * d * math.log(math.pi)
                - gammaln(0.5 * d)
                + math.log1p(x * x / (2.0 * d))
            )
        else:
            ang = (
                0.5 * d * LOG_2PI
                + (1.0 - 0.5 * d) * math.log(x)
                + x
                + math.log(ive(0.5 * d - 1.0, x))
            )
        return (d - 1) * math.log(r) - 0.5 * r * r - lam * r - 0.5 * m * m + ang

    peak = max(log_g(r) for r in rs)
    val, _ = integrate.quad(
        lambda r: math.exp(log_g(r) - peak), 0, upper, epsabs=1e-14, epsrel=1e-12,
        limit=500,
    )
    return peak + math.log(val)


class TestClosedForms:
    def test_lam_zero_is_gaussian_mass(self):
        for d in (1, 2, 5, 9):
            for m in (0.0, 3.7):
                assert log_radial_integral(d, m, 0.0) == pytest.approx(
                    0.5 * d * LOG_2PI, abs=1e-14
                )

    def test_one_dim_frozen_value(self):
        # oracle: direct quadrature of exp(-t^2/2 - |t|), equal to
        # 2 sqrt(2 pi) e^(1/2) Phi(-1)
        assert log_radial_integral(1, 0.0, 1.0) == pytest.approx(
            0.27106406875535466, abs=1e-10
        )

    def test_one_dim_against_quadrature_grid(self):
        for m in np.linspace(0.0, 20.0, 11):
            for lam in (0.1, 1.0, 5.0):
                assert log_radial_integral(1, m, lam) == pytest.approx(
                    quad_oracle_1d(m, lam), abs=1e-10
                )

    def test_three_dim_frozen_value(self):
        # oracle: 4 pi * quad of r^2 exp(-r^2/2 - r)
        got = log_radial_integral(3, 0.0, 1.0)
        assert got == pytest.approx(1.3642158277384298, rel=1e-8)
        assert math.exp(got) == pytest.approx(3.91265365, rel=1e-6)


class TestGeneralDimension:
    @pytest.mark.parametrize("d", [2, 3, 4, 5, 8, 13, 32, 64])
    def test_agrees_with_bessel_kernel_oracle(self, d):
        for m in (0.0, 0.7, 6.0, 25.0):
            for lam in (0.5, 2.0):
                got = log_radial_integral(d, m, lam)
                want = bessel_kernel_oracle(d, m, lam)
                assert got == pytest.approx(want, rel=1e-8, abs=1e-8)

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_monte_carlo_oracle(self, d):
        rng = np.random.default_rng(d)
        for m, lam in ((0.0, 1.0), (2.5, 0.7)):
            t = rng.standard_normal((10**6, d))
            t[:, 0] += m
            w = np.exp(-lam * np.linalg.norm(t, axis=1))
            est = 0.5 * d * LOG_2PI + math.log(w.mean())
            se = w.std() / math.sqrt(len(w)) / w.mean()
            assert abs(log_radial_integral(d, m, lam) - est) < 3.0 * se

    def test_monotone_decreasing_in_lam(self):
        vals = [log_radial_integral(4, 3.0, lam) for lam in (0.1, 0.5, 1.0, 2.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_decreasing_in_m(self):
        # shifting the Gaussian away from the Laplace peak loses mass
        vals = [log_radial_integral(5, m, 1.0) for m in (0.0, 1.0, 4.0, 9.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestDomainErrors:
    def test_rejects_bad_arguments(self):
        with pytest.raises(ConfigError):
            log_radial_integral(0, 1.0, 1.0)
        with pytest.raises(ConfigError):
            log_radial_integral(2, 1.0, -0.5)
        with pytest.raises(ConfigError):
            log_radial_integral(2, -1.0, 0.5)
