"""Distribution functions used by the score test and the Monte Carlo harness.

Self-contained: the regularized incomplete gamma function is evaluated by its
power series for ``x < a + 1`` and by a Lentz continued fraction otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _gamma_series(a: float, x: float) -> float:
    # P(a, x) = x^a e^-x / Gamma(a + 1) * sum_n x^n / ((a+1)...(a+n))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise NumericError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cf(a: float, x: float) -> float:
    # Q(a, x) by modified Lentz on the Legendre continued fraction
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
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise NumericError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if not a > 0 or x < 0 or math.isnan(x):
        raise DomainError(f"need a > 0 and x >= 0, got a={a}, x={x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_cf(a, x))


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``."""
    if not a > 0 or x < 0 or math.isnan(x):
        raise DomainError(f"need a > 0 and x >= 0, got a={a}, x={x}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return min(1.0, _gamma_cf(a, x))


def _check_df(df):
    if not df >= 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {df}")


def chi2_cdf(x: float, df: float) -> float:
    _check_df(df)
    if x < 0:
        raise DomainError(f"chi-squared cdf needs x >= 0, got {x}")
    return gammainc_lower(0.5 * df, 0.5 * x)


def chi2_sf(x: float, df: float) -> float:
    """Upper tail ``1 - chi2_cdf``, accurate for small p-values."""
    _check_df(df)
    if x < 0:
        raise DomainError(f"chi-squared sf needs x >= 0, got {x}")
    return gammainc_upper(0.5 * df, 0.5 * x)


def chi2_pdf(x: float, df: float) -> float:
    if x < 0:
        return 0.0
    k = 0.5 * df
    if x == 0:
        return math.inf if k < 1 else (0.5 if k == 1 else 0.0)
    return math.exp((k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k))


def chi2_quantile(p: float, df: float, tol: float = 1e-12) -> float:
    """Inverse of :func:`chi2_cdf` by bracketing then safeguarded Newton."""
    _check_df(df)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    lo, hi = 0.0, max(1.0, float(df))
    while chi2_cdf(hi, df) < p:
        lo, hi = hi, 2.0 * hi
    x = 0.5 * (lo + hi)
    for _ in range(200):
        err = chi2_cdf(x, df) - p
        if abs(err) < tol:
            return x
        if err > 0:
            hi = x
        else:
            lo = x
        dens = chi2_pdf(x, df)
        step = err / dens if dens > 0 else math.inf
        nxt = x - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == x:
            return x
        x = nxt
    return x


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class NoncentralChi2:
    """Noncentral chi-squared law ``|Z|^2`` with ``Z ~ N(m, I_df)``, ``ncp = |m|^2``."""

    df: float
    ncp: float

    def __post_init__(self):
        _check_df(self.df)
        if not self.ncp >= 0:
            raise DomainError(f"noncentrality must be >= 0, got {self.ncp}")

    def cdf(self, x: float) -> float:
        return noncentral_chi2_cdf(x, self.df, self.ncp)

    def sf(self, x: float) -> float:
        return 1.0 - self.cdf(x)

    @property
    def mean(self) -> float:
        return self.df + self.ncp


def noncentral_chi2_cdf(x: float, df: float, ncp: float, tail_tol: float = 1e-12,
                        max_terms: int = 100_000) -> float:
    """Poisson(ncp/2) mixture of central chi-squared CDFs with ``df + 2j``
    degrees of freedom, truncated once the unvisited Poisson mass is below
    ``tail_tol``."""
    _check_df(df)
    if not ncp >= 0:
        raise DomainError(f"noncentrality must be >= 0, got {ncp}")
    if x < 0:
        raise DomainError(f"cdf needs x >= 0, got {x}")
    half = 0.5 * ncp
    if half == 0:
        return chi2_cdf(x, df)
    if x == 0:
        return 0.0
    log_half = math.log(half)
    total = 0.0
    mass = 0.0
    for j in range(max_terms):
        w = math.exp(-half + j * log_half - math.lgamma(j + 1.0))
        mass += w
        total += w * gammainc_lower(0.5 * df + j, 0.5 * x)
        if j > half and 1.0 - mass < tail_tol:
            return min(1.0, max(0.0, total))
    raise NumericError(f"noncentral chi-squared series did not converge in {max_terms} terms")


def ks_statistic(sample, cdf) -> float:
    """Kolmogorov-Smirnov distance between a sorted sample and ``cdf``."""
    x = np.asarray(sample, dtype=np.float64)
    n = x.size
    if n == 0:
        raise DomainError("KS statistic needs a non-empty sample")
    if np.any(np.diff(x) < 0):
        raise DomainError("KS sample must be sorted ascending")
    try:
        # scalar-only cdfs fail (or warn, for size-1 arrays) on array input
        with warnings.catch_warnings():
            warnings.simplefilter("error", DeprecationWarning)
            f = np.asarray(cdf(x), dtype=np.float64)
        if f.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError, DeprecationWarning):
        f = np.array([cdf(v) for v in x], dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(f - i / n)), np.max(np.abs(f - (i - 1) / n))))


def kolmogorov_sf(x: float) -> float:
    """Limiting ``P(sqrt(n) D_n > x)``."""
    if x <= 0:
        return 1.0
    total = 0.0
    for k in range(1, 200):
        term = (-1) ** (k - 1) * math.exp(-2.0 * k * k * x * x)
        total += term
        if abs(term) < 1e-18:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_critical_value(n: int, level: float) -> float:
    """Approximate critical distance for a sample of size ``n``, using the
    limiting Kolmogorov quantile with Stephens' finite-sample correction."""
    if n < 1 or not 0 < level < 1:
        raise DomainError("need n >= 1 and level in (0, 1)")
    lo, hi = 0.0, 5.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if kolmogorov_sf(mid) > level:
            lo = mid
        else:
            hi = mid
    root = math.sqrt(n)
    return hi / (root + 0.12 + 0.11 / root)


def exp1_cdf(x: float) -> float:
    return -math.expm1(-x) if x > 0 else 0.0


def uniform_cdf(x: float) -> float:
    return min(1.0, max(0.0, x))
