"""Chi-squared sampling theory for scaled Granger-Geweke estimators.

Under the null, ``N * F_hat`` is asymptotically chi2(d) where ``N`` is the
regression row count (``T - p``) and ``d`` the number of restricted
coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

_EPS = 1e-14
_TINY = 1e-300
_MAX_ITER = 100_000


def _log_prefactor(a: float, x: float) -> float:
    return -x + a * math.log(x) - math.lgamma(a)


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized P(a, x) by its power series (good for x < a + 1)."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(_log_prefactor(a, x))
    raise ArithmeticError(f"incomplete gamma series failed to converge (a={a}, x={x})")


def _gamma_cf(a: float, x: float) -> float:
    """Upper regularized Q(a, x) by Lentz's continued fraction (good for x >= a + 1)."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(_log_prefactor(a, x)) * h
    raise ArithmeticError(f"incomplete gamma continued fraction failed (a={a}, x={x})")


def gammainc_lower(a: float, x: float) -> float:
    if x < 0 or a <= 0:
        raise ValueError("need a > 0 and x >= 0")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def gammainc_upper(a: float, x: float) -> float:
    if x < 0 or a <= 0:
        raise ValueError("need a > 0 and x >= 0")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def _check_dof(d) -> float:
    if d < 1 or int(d) != d:
        raise ValueError(f"degrees of freedom must be a positive integer, got {d}")
    return float(d)


def chi2_cdf(x: float, d: int) -> float:
    """P(X <= x) for X ~ chi2(d)."""
    d = _check_dof(d)
    if x < 0:
        raise ValueError("chi2_cdf requires x >= 0")
    return gammainc_lower(d / 2.0, x / 2.0)


def chi2_sf(x: float, d: int) -> float:
    """P(X > x) for X ~ chi2(d), computed without cancellation."""
    d = _check_dof(d)
    if x < 0:
        raise ValueError("chi2_sf requires x >= 0")
    return gammainc_upper(d / 2.0, x / 2.0)


def chi2_pdf(x: float, d: int) -> float:
    d = _check_dof(d)
    if x < 0:
        return 0.0
    a = d / 2.0
    if x == 0:
        return 0.5 if a == 1.0 else (math.inf if a < 1.0 else 0.0)
    return 0.5 * math.exp(_log_prefactor(a, x / 2.0) - math.log(x / 2.0))


def chi2_quantile(prob: float, d: int) -> float:
    """Inverse of :func:`chi2_cdf` by bracketing plus safeguarded Newton steps."""
    d = _check_dof(d)
    if not 0.0 <= prob < 1.0:
        raise ValueError("prob must lie in [0, 1)")
    if prob == 0.0:
        return 0.0

    upper = prob > 0.5
    target = math.log1p(-prob) if upper else math.log(prob)

    def g(x: float) -> float:
        # log of the tail being matched, minus its target
        v = chi2_sf(x, d) if upper else chi2_cdf(x, d)
        return (math.log(v) if v > 0 else -math.inf) - target

    lo, hi = 0.0, max(d, 1.0)
    while (g(hi) > 0) if upper else (g(hi) < 0):
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise ArithmeticError("chi2_quantile failed to bracket")

    # Wilson-Hilferty start, clipped into the bracket
    z = _normal_quantile(prob)
    c = 2.0 / (9.0 * d)
    x = d * (1.0 - c + z * math.sqrt(c)) ** 3
    if not upper:
        # leading term of the lower series, P(a, y) ~ y**a / Gamma(a + 1)
        a = d / 2.0
        x_series = 2.0 * math.exp((math.log(prob) + math.lgamma(a + 1.0)) / a)
        if x_series < x or not x > 0:
            x = x_series
    if not lo < x < hi:
        x = 0.5 * (lo + hi)

    for _ in range(200):
        gx = g(x)
        if gx == 0.0:
            return x
        increasing = not upper
        if (gx < 0) == increasing:
            lo = x
        else:
            hi = x
        tail = chi2_sf(x, d) if upper else chi2_cdf(x, d)
        dens = chi2_pdf(x, d)
        slope = (-dens if upper else dens) / tail if tail > 0 else 0.0
        step = gx / slope if slope != 0.0 else math.inf
        x_new = x - step
        if not lo < x_new < hi or not math.isfinite(x_new):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * x or hi - lo <= 1e-15 * hi:
            return x_new
        x = x_new
    return x


def _normal_quantile(p: float) -> float:
    # Abramowitz-Stegun 26.2.23; only used as a Newton starting value.
    if p <= 0.0 or p >= 1.0:
        return 0.0
    q = math.sqrt(-2.0 * math.log(min(p, 1.0 - p)))
    z = q - (2.515517 + 0.802853 * q + 0.010328 * q * q) / (
        1.0 + 1.432788 * q + 0.189269 * q * q + 0.001308 * q ** 3
    )
    return z if p > 0.5 else -z


def noncentral_chi2_sf(x: float, d: int, lam: float, rtol: float = 1e-10) -> float:
    """P(X > x) for X ~ noncentral chi2(d; lam).

    Sums the Poisson(lam/2) mixture of central chi2(d + 2j) tails outward from
    the Poisson mode; each direction stops once a geometric bound on the
    remaining Poisson mass drops below ``rtol`` times the running total.
    """
    d = int(_check_dof(d))
    if lam < 0:
        raise ValueError("noncentrality must be non-negative")
    if x < 0:
        raise ValueError("x must be non-negative")
    if lam == 0:
        return chi2_sf(x, d)
    half = lam / 2.0
    mode = int(half)
    log_w0 = -half + mode * math.log(half) - math.lgamma(mode + 1)

    total = 0.0
    j, log_w = mode, log_w0
    while True:
        w = math.exp(log_w)
        total += w * chi2_sf(x, d + 2 * j)
        r = half / (j + 1)
        if r < 1.0 and w * r / (1.0 - r) <= rtol * total:
            break
        if j - mode > _MAX_ITER:
            raise ArithmeticError("noncentral chi2 series failed to converge")
        j += 1
        log_w += math.log(half) - math.log(j)

    j, log_w = mode, log_w0
    while j > 0:
        log_w += math.log(j) - math.log(half)
        j -= 1
        w = math.exp(log_w)
        total += w * chi2_sf(x, d + 2 * j)
        s = j / half
        if s < 1.0 and w * s / (1.0 - s) <= rtol * total:
            break
    return min(1.0, total)


def gc_pvalue(F_hat: float, N: int, d: int, noncentrality: float = 0.0) -> float:
    """P-value of a GC estimate: ``P(chi2(d; N*lambda) > N * F_hat)``."""
    if N < 1:
        raise ValueError("effective sample size must be >= 1")
    if F_hat < 0:
        raise ValueError("GC statistic must be non-negative")
    if noncentrality == 0.0:
        return chi2_sf(N * F_hat, d)
    return noncentral_chi2_sf(N * F_hat, d, N * noncentrality)


@dataclass(frozen=True)
class SignificanceSpec:
    alpha: float = 0.05
    correction: Literal["none", "bonferroni"] = "bonferroni"
    m: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.correction not in ("none", "bonferroni"):
            raise ValueError(f"unknown correction {self.correction!r}")
        if self.m < 1:
            raise ValueError("hypothesis count m must be >= 1")
        if not 0.0 < self.alpha_eff < 1.0:
            raise ValueError("effective significance level underflows")

    @property
    def alpha_eff(self) -> float:
        return self.alpha / self.m if self.correction == "bonferroni" else self.alpha


def critical_level(spec: SignificanceSpec, N: int, d: int) -> float:
    """Critical GC value (in GC units) above which the null is rejected."""
    if N < 1:
        raise ValueError("effective sample size must be >= 1")
    return chi2_quantile(1.0 - spec.alpha_eff, d) / N


def is_significant(pvalue: float, spec: SignificanceSpec) -> bool:
    return pvalue < spec.alpha_eff
