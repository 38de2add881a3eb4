"""Gamma, regularized incomplete gamma, and the chi / chi-square / normal laws.

All functions accept scalars or numpy arrays and return the same kind.
Non-integer degrees of freedom are supported throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

LN2 = math.log(2.0)
HALF_LN_2PI = 0.5 * math.log(2.0 * math.pi)
EPS = np.finfo(float).eps
TINY = 1e-300
MAX_SERIES_TERMS = 200_000

# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _out(values, scalar: bool):
    return float(values) if scalar else values


@dataclass(frozen=True)
class ChiParams:
    nu: float

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ValueError(f"degrees of freedom must be positive, got {self.nu}")

    def pdf(self, x):
        return chi_pdf(self, x)

    def cdf(self, x):
        return chi_cdf(self, x)


@dataclass(frozen=True)
class ChiSquareParams:
    nu: float

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ValueError(f"degrees of freedom must be positive, got {self.nu}")

    def pdf(self, x):
        return chi2_pdf(self, x)

    def cdf(self, x):
        return chi2_cdf(self, x)


@dataclass(frozen=True)
class NormalParams:
    mu: float
    sigma2: float

    def __post_init__(self):
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"variance must be positive, got {self.sigma2}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def pdf(self, x):
        return normal_pdf(self, x)

    def cdf(self, x):
        return normal_cdf(self, x)


def _as_chi(p) -> ChiParams:
    return p if isinstance(p, ChiParams) else ChiParams(float(p))


def _as_chi2(p) -> ChiSquareParams:
    return p if isinstance(p, ChiSquareParams) else ChiSquareParams(float(p))


def log_gamma(z):
    """ln Gamma(z) for z > 0 (Lanczos, with reflection below 1/2)."""
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=np.float64)
    if np.any(~(z > 0)):
        raise ValueError("log_gamma is defined here for z > 0 only")
    out = np.empty_like(z)
    small = z < 0.5
    if np.any(small):
        zs = z[small]
        # Gamma(z) Gamma(1-z) = pi / sin(pi z)
        out[small] = math.log(math.pi) - np.log(np.sin(math.pi * zs)) - _lanczos(1.0 - zs)
    if np.any(~small):
        out[~small] = _lanczos(z[~small])
    return _out(out, scalar)


def _lanczos(z: np.ndarray) -> np.ndarray:
    z = z - 1.0
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return HALF_LN_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


def _incomplete_gamma(a: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (P, Q) for broadcast arrays a > 0, x >= 0."""
    a, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(x, dtype=np.float64))
    if np.any(~(a > 0)):
        raise ValueError("incomplete gamma requires a > 0")
    if np.any(~(x >= 0)):
        raise ValueError("incomplete gamma requires x >= 0")
    a = a.ravel()
    x = x.ravel()
    P = np.zeros_like(x)
    Q = np.ones_like(x)

    inf = np.isinf(x)
    P[inf], Q[inf] = 1.0, 0.0
    pos = (x > 0) & ~inf
    series = pos & (x < a + 1.0)
    frac = pos & ~series

    if np.any(series):
        idx = np.flatnonzero(series)
        aa, xx = a[idx], x[idx]
        term = 1.0 / aa
        total = term.copy()
        ap = aa.copy()
        active = np.arange(idx.size)
        for _ in range(MAX_SERIES_TERMS):
            ap[active] += 1.0
            term[active] *= xx[active] / ap[active]
            total[active] += term[active]
            active = active[np.abs(term[active]) >= np.abs(total[active]) * EPS]
            if active.size == 0:
                break
        else:
            raise RuntimeError("incomplete gamma series failed to converge")
        p = total * np.exp(-xx + aa * np.log(xx) - log_gamma(aa))
        P[idx] = np.minimum(p, 1.0)
        Q[idx] = 1.0 - P[idx]

    if np.any(frac):
        idx = np.flatnonzero(frac)
        aa, xx = a[idx], x[idx]
        # modified Lentz evaluation of the continued fraction for Q
        b = xx + 1.0 - aa
        c = np.full_like(xx, 1.0 / TINY)
        d = 1.0 / b
        h = d.copy()
        active = np.arange(idx.size)
        for i in range(1, MAX_SERIES_TERMS):
            an = -i * (i - aa[active])
            b[active] += 2.0
            dd = an * d[active] + b[active]
            dd = np.where(np.abs(dd) < TINY, TINY, dd)
            cc = b[active] + an / c[active]
            cc = np.where(np.abs(cc) < TINY, TINY, cc)
            dd = 1.0 / dd
            delta = dd * cc
            d[active], c[active] = dd, cc
            h[active] *= delta
            active = active[np.abs(delta - 1.0) >= EPS]
            if active.size == 0:
                break
        else:
            raise RuntimeError("incomplete gamma continued fraction failed to converge")
        q = np.exp(-xx + aa * np.log(xx) - log_gamma(aa)) * h
        Q[idx] = np.minimum(q, 1.0)
        P[idx] = 1.0 - Q[idx]

    return P, Q


def reg_inc_gamma_p(a, x):
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a)."""
    scalar = np.ndim(a) == 0 and np.ndim(x) == 0
    shape = np.broadcast(np.asarray(a), np.asarray(x)).shape
    P, _ = _incomplete_gamma(a, x)
    return _out(P.reshape(shape), scalar)


def reg_inc_gamma_q(a, x):
    """Upper-tail complement Q(a, x) = 1 - P(a, x), computed without cancellation."""
    scalar = np.ndim(a) == 0 and np.ndim(x) == 0
    shape = np.broadcast(np.asarray(a), np.asarray(x)).shape
    _, Q = _incomplete_gamma(a, x)
    return _out(Q.reshape(shape), scalar)


def _check_nonneg(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x >= 0)):
        raise ValueError("argument must be nonnegative")
    return x


def _pdf_from_log(logpdf_fn, x: np.ndarray, at_zero: float) -> np.ndarray:
    out = np.empty_like(x)
    zero = x == 0
    out[zero] = at_zero
    with np.errstate(divide="ignore"):
        out[~zero] = np.exp(logpdf_fn(x[~zero]))
    return out


def chi_pdf(p, x):
    """Density 2^(1-nu/2) x^(nu-1) exp(-x^2/2) / Gamma(nu/2)."""
    p = _as_chi(p)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(_check_nonneg(x))
    nu = p.nu
    const = (1.0 - nu / 2.0) * LN2 - log_gamma(nu / 2.0)
    if nu < 1:
        at_zero = math.inf
    elif nu == 1:
        at_zero = math.exp(const)
    else:
        at_zero = 0.0
    out = _pdf_from_log(lambda v: const + (nu - 1.0) * np.log(v) - 0.5 * v * v, x, at_zero)
    return _out(out[0] if scalar else out, scalar)


def chi_cdf(p, x):
    """P(nu/2, x^2/2)."""
    p = _as_chi(p)
    x = _check_nonneg(x)
    return reg_inc_gamma_p(p.nu / 2.0, (x * x) / 2.0)


def chi2_pdf(p, x):
    """Density x^(nu/2-1) exp(-x/2) / (2^(nu/2) Gamma(nu/2))."""
    p = _as_chi2(p)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(_check_nonneg(x))
    nu = p.nu
    const = -(nu / 2.0) * LN2 - log_gamma(nu / 2.0)
    if nu < 2:
        at_zero = math.inf
    elif nu == 2:
        at_zero = 0.5
    else:
        at_zero = 0.0
    out = _pdf_from_log(lambda v: const + (nu / 2.0 - 1.0) * np.log(v) - 0.5 * v, x, at_zero)
    return _out(out[0] if scalar else out, scalar)


def chi2_cdf(p, x):
    """P(nu/2, x/2)."""
    p = _as_chi2(p)
    x = _check_nonneg(x)
    return reg_inc_gamma_p(p.nu / 2.0, x / 2.0)


def normal_pdf(p: NormalParams, x):
    scalar = np.ndim(x) == 0
    z = (np.asarray(x, dtype=np.float64) - p.mu) / p.sigma
    return _out(np.exp(-0.5 * z * z) / (p.sigma * math.sqrt(2.0 * math.pi)), scalar)


def normal_cdf(p: NormalParams, x):
    """Phi((x - mu) / sigma) through the complementary error function."""
    scalar = np.ndim(x) == 0
    z = (np.asarray(x, dtype=np.float64) - p.mu) / (p.sigma * math.sqrt(2.0))
    return _out(0.5 * erfc(-z), scalar)


def chi_normal_approx(p) -> NormalParams:
    """Laplace approximation of chi(nu): N(sqrt(nu - 1), 1/2); needs nu > 1."""
    p = _as_chi(p)
    if p.nu <= 1:
        raise ValueError(f"normal approximation of chi(nu) needs nu > 1 (mode undefined), got {p.nu}")
    return NormalParams(mu=math.sqrt(p.nu - 1.0), sigma2=0.5)


def chi2_normal_approx(p) -> NormalParams:
    """Moment-matched normal N(nu, 2 nu) for chi-square(nu)."""
    p = _as_chi2(p)
    return NormalParams(mu=p.nu, sigma2=2.0 * p.nu)
