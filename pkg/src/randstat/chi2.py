"""Chi-square distribution with integer degrees of freedom.

CDF and survival are the regularized incomplete gamma functions P(df/2, t/2)
and Q(df/2, t/2). Below ``x = a + 1`` the power series for P converges fast;
above it the Legendre continued fraction for Q does. The opposite tail is
one minus the computed one; on either side of the split the computed tail is
the one that can become small, so the survival function keeps its relative
accuracy deep into the right tail.

All functions accept scalars or numpy arrays for ``t`` / ``q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = ["ChiSquare", "chi2_cdf", "chi2_survival", "chi2_pdf", "chi2_quantile"]

_EPS = 1e-17
_MAX_ITER = 100_000
_FPMIN = 1e-300


@dataclass(frozen=True)
class ChiSquare:
    df: int

    def __post_init__(self) -> None:
        if isinstance(self.df, bool) or int(self.df) != self.df or self.df < 1:
            raise ValueError(f"degrees of freedom must be a positive integer, got {self.df!r}")
        object.__setattr__(self, "df", int(self.df))


def _log_prefactor(a: float, x: np.ndarray) -> np.ndarray:
    # log(x^a e^-x / Gamma(a))
    return a * np.log(x) - x - math.lgamma(a)


def _lower_series(a: float, x: np.ndarray) -> np.ndarray:
    """P(a, x) by the series sum_k x^k / (a (a+1) ... (a+k)); use for x < a + 1."""
    term = np.full_like(x, 1.0 / a)
    total = term.copy()
    denom = a
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        denom += 1.0
        term = np.where(active, term * x / denom, term)
        total = np.where(active, total + term, total)
        active &= np.abs(term) > np.abs(total) * _EPS
        if not active.any():
            break
    return total * np.exp(_log_prefactor(a, x))


def _upper_fraction(a: float, x: np.ndarray) -> np.ndarray:
    """Q(a, x) by the continued fraction (modified Lentz); use for x >= a + 1."""
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b = b + 2.0
        d_new = an * d + b
        d_new = np.where(np.abs(d_new) < _FPMIN, _FPMIN, d_new)
        c_new = b + an / c
        c_new = np.where(np.abs(c_new) < _FPMIN, _FPMIN, c_new)
        d_new = 1.0 / d_new
        delta = d_new * c_new
        d = np.where(active, d_new, d)
        c = np.where(active, c_new, c)
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > _EPS
        if not active.any():
            break
    return h * np.exp(_log_prefactor(a, x))


def _split(dist: ChiSquare, t):
    """Return (lower, upper) regularized gamma at x = t/2, computed side by side."""
    a = dist.df / 2.0
    x = np.asarray(t, dtype=np.float64) / 2.0
    lower = np.zeros(x.shape)
    upper = np.ones(x.shape)
    pos = x > 0
    if np.any(np.isposinf(x)):
        lower[np.isposinf(x)] = 1.0
        upper[np.isposinf(x)] = 0.0
        pos &= np.isfinite(x)
    small = pos & (x < a + 1.0)
    large = pos & (x >= a + 1.0)
    if small.any():
        lower[small] = _lower_series(a, x[small])
        upper[small] = 1.0 - lower[small]
    if large.any():
        upper[large] = _upper_fraction(a, x[large])
        lower[large] = 1.0 - upper[large]
    return lower, upper


def _out(v: np.ndarray, t):
    return float(v) if np.ndim(t) == 0 else v


def chi2_cdf(dist: ChiSquare, t):
    """P(Z <= t) for Z ~ chi2(df); 0 for t <= 0."""
    lower, _ = _split(dist, t)
    return _out(np.clip(lower, 0.0, 1.0), t)


def chi2_survival(dist: ChiSquare, t):
    """P(Z > t) computed from the upper tail directly, not as 1 - CDF."""
    _, upper = _split(dist, t)
    return _out(np.clip(upper, 0.0, 1.0), t)


def chi2_pdf(dist: ChiSquare, t):
    a = dist.df / 2.0
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = t / 2.0
        dens = 0.5 * np.exp((a - 1.0) * np.log(x) - x - math.lgamma(a))
    if dist.df == 2:
        dens = np.where(t >= 0, 0.5 * np.exp(-t / 2.0), 0.0)
    elif dist.df == 1:
        dens = np.where(t > 0, dens, np.where(t == 0, np.inf, 0.0))
    else:
        dens = np.where(t > 0, dens, 0.0)
    return _out(dens, t)


def _quantile_scalar(dist: ChiSquare, q: float) -> float:
    lo, hi = 0.0, dist.df + 20.0 * math.sqrt(2.0 * dist.df) + 50.0
    while chi2_cdf(dist, hi) < q and chi2_survival(dist, hi) > 1.0 - q:
        hi *= 2.0
    # track the residual in whichever tail is small, for accuracy near q -> 1
    upper_tail = q > 0.5
    target = 1.0 - q if upper_tail else q

    def resid(t: float) -> float:
        if upper_tail:
            return target - chi2_survival(dist, t)
        return chi2_cdf(dist, t) - target

    # Wilson-Hilferty start
    k = dist.df
    z = float(ndtri(q))
    t = k * (1.0 - 2.0 / (9.0 * k) + z * math.sqrt(2.0 / (9.0 * k))) ** 3
    if not lo < t < hi:
        t = 0.5 * (lo + hi)
    for _ in range(200):
        f = resid(t)
        if f == 0.0:
            return t
        if f < 0:
            lo = t
        else:
            hi = t
        dens = chi2_pdf(dist, t)
        step_ok = False
        if dens > 0 and math.isfinite(dens):
            t_new = t - f / dens
            step_ok = lo < t_new < hi
        if not step_ok:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-15 * t or hi - lo <= 1e-15 * hi:
            t = t_new
            break
        t = t_new
    return t


def chi2_quantile(dist: ChiSquare, q):
    """Inverse CDF: the t with chi2_cdf(t) = q, for 0 < q < 1."""
    qa = np.asarray(q, dtype=np.float64)
    if np.any(~((qa > 0.0) & (qa < 1.0))):
        raise ValueError(f"quantile level must lie in (0, 1), got {q!r}")
    if qa.ndim == 0:
        return _quantile_scalar(dist, float(qa))
    return np.array([_quantile_scalar(dist, float(v)) for v in qa.ravel()]).reshape(qa.shape)
