import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from granger_horizons.inference import (
    SignificanceSpec,
    chi2_cdf,
    chi2_pdf,
    chi2_quantile,
    chi2_sf,
    critical_level,
    gammainc_lower,
    gammainc_upper,
    gc_pvalue,
    is_significant,
    noncentral_chi2_sf,
)


def quad_cdf(x, d):
    """P(chi2_d <= x) by adaptive quadrature after the substitution x = s**2."""
    log_c = math.log(2.0) - (d / 2) * math.log(2.0) - math.lgamma(d / 2)
    f = lambda s: math.exp(log_c + (d - 1) * math.log(s) - s * s / 2) if s > 0 else (
        math.exp(log_c) if d == 1 else 0.0)
    val, _ = integrate.quad(f, 0.0, math.sqrt(x), epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def mp_sf(x, d):
    with mpmath.workdps(40):
        return float(mpmath.gammainc(mpmath.mpf(d) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True))


class TestIncompleteGamma:
    def test_known_values(self):
        # P(1, x) = 1 - exp(-x)
        for x in (0.1, 1.0, 2.0, 10.0):
            assert gammainc_lower(1.0, x) == pytest.approx(-math.expm1(-x), rel=1e-14)
            assert gammainc_upper(1.0, x) == pytest.approx(math.exp(-x), rel=1e-13)

    def test_complementary(self):
        for a in (0.5, 1.0, 2.5, 10.0):
            for x in (0.01, 0.5, a, a + 1.0, 3 * a + 5):
                assert gammainc_lower(a, x) + gammainc_upper(a, x) == pytest.approx(1.0, abs=1e-14)

    def test_domain(self):
        with pytest.raises(ValueError):
            gammainc_lower(0.0, 1.0)
        with pytest.raises(ValueError):
            gammainc_upper(1.0, -1.0)


class TestChi2:
    @pytest.mark.parametrize("d", [1, 2, 5, 20])
    def test_cdf_against_quadrature(self, d):
        for x in np.linspace(0.05, 4 * d + 10, 12):
            assert abs(chi2_cdf(x, d) - quad_cdf(x, d)) < 1e-10

    @pytest.mark.parametrize("d,x", [(1, 60.0), (5, 200.0), (20, 300.0), (100, 500.0), (2, 1e-8)])
    def test_sf_relative_accuracy_in_tails(self, d, x):
        assert chi2_sf(x, d) == pytest.approx(mp_sf(x, d), rel=1e-12)

    def test_d2_closed_form(self):
        for x in (0.3, 3.0, 30.0):
            assert chi2_sf(x, 2) == pytest.approx(math.exp(-x / 2), rel=1e-13)

    def test_pdf(self):
        assert chi2_pdf(2.0, 2) == pytest.approx(0.5 * math.exp(-1.0), rel=1e-14)
        assert chi2_pdf(0.0, 2) == 0.5
        assert chi2_pdf(-1.0, 3) == 0.0

    def test_invalid_dof(self):
        for d in (0, -1, 1.5):
            with pytest.raises(ValueError):
                chi2_cdf(1.0, d)

    def test_quantile_known(self):
        assert chi2_quantile(0.95, 1) == pytest.approx(3.841458820694124, rel=1e-12)
        assert chi2_quantile(0.95, 2) == pytest.approx(-2 * math.log(0.05), rel=1e-12)
        assert chi2_quantile(0.0, 3) == 0.0
        with pytest.raises(ValueError):
            chi2_quantile(1.0, 3)

    @settings(max_examples=200, deadline=None)
    @given(p=st.floats(1e-10, 1 - 1e-10), d=st.integers(1, 400))
    def test_quantile_round_trip(self, p, d):
        x = chi2_quantile(p, d)
        assert abs(chi2_cdf(x, d) - p) < 1e-8

    def test_extreme_upper_quantile(self):
        # the Bonferroni level for 400 cells
        x = chi2_quantile(1 - 0.05 / 400, 1)
        assert chi2_sf(x, 1) == pytest.approx(0.05 / 400, rel=1e-9)


class TestNoncentral:
    @pytest.mark.parametrize("x,d,lam", [(3.0, 1, 0.5), (10.0, 4, 7.0), (50.0, 2, 40.0), (300.0, 5, 250.0),
                                         (1.0, 3, 1e-3)])
    def test_against_mpmath_series(self, x, d, lam):
        with mpmath.workdps(40):
            h = mpmath.mpf(lam) / 2
            # explicit Poisson mixture, truncated far beyond the mode
            J = int(h + 40 * mpmath.sqrt(h + 1) + 60)
            ref = mpmath.fsum(mpmath.exp(-h + j * mpmath.log(h) - mpmath.loggamma(j + 1))
                              * mpmath.gammainc((d + 2 * j) / mpmath.mpf(2), mpmath.mpf(x) / 2,
                                                mpmath.inf, regularized=True) for j in range(J))
        assert noncentral_chi2_sf(x, d, lam) == pytest.approx(float(ref), rel=1e-9)

    def test_zero_noncentrality(self):
        assert noncentral_chi2_sf(4.0, 3, 0.0) == chi2_sf(4.0, 3)


class TestSignificance:
    def test_bonferroni(self):
        spec = SignificanceSpec(0.05, "bonferroni", 400)
        assert spec.alpha_eff == 0.05 / 400
        assert SignificanceSpec(0.05, "none", 400).alpha_eff == 0.05
        assert is_significant(1e-5, spec) and not is_significant(2e-4, spec)

    def test_validation(self):
        with pytest.raises(ValueError):
            SignificanceSpec(0.0)
        with pytest.raises(ValueError):
            SignificanceSpec(0.05, "holm")
        with pytest.raises(ValueError):
            SignificanceSpec(0.05, "bonferroni", 0)

    def test_critical_level_and_pvalue_agree(self):
        spec = SignificanceSpec(0.05, "bonferroni", 400)
        crit = critical_level(spec, 980, 1)
        assert crit == pytest.approx(0.015016037130015, rel=1e-10)
        assert gc_pvalue(crit, 980, 1) == pytest.approx(spec.alpha_eff, rel=1e-9)

    def test_pvalue_is_chi2_tail(self):
        assert gc_pvalue(0.01, 1000, 3) == chi2_sf(10.0, 3)
        with pytest.raises(ValueError):
            gc_pvalue(-0.1, 100, 1)
        with pytest.raises(ValueError):
            gc_pvalue(0.1, 0, 1)
