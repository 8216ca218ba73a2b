"""Phi-divergence goodness-of-fit statistics, classical and randomized.

Classical, from counts Y ~ Mult(n, p):

    T = 2n / phi''(1) * sum_j p_j phi(Y_j / (n p_j))

Randomized, from the individual outcomes eta_1..eta_n and theta on S^{n-1}:

    X_j = sum_i theta_i (eta_ij - p_j)
    T_theta = 2n / phi''(1) * sum_j p_j phi(1 + X_j / (sqrt(n) p_j))

With only counts at hand, the outcomes are rebuilt in canonical block order
(Y_1 ones of category 1, then Y_2 of category 2, ...). Sphere weights are
exchangeable, so that reconstruction leaves the law of T_theta unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import xlogy

from .chi2 import ChiSquare, chi2_survival
from .core import (
    CountVector,
    ProbabilityVector,
    RandomSource,
    UnitWeights,
    ValidationError,
    sample_sphere,
)

__all__ = [
    "DomainError",
    "PhiSpec",
    "GofTestResult",
    "SampleSizeReport",
    "phi_lambda",
    "custom_phi",
    "third_derivative",
    "lipschitz_excess",
    "classical_phi_statistic",
    "weighted_multinomial_sum",
    "randomized_phi_statistic",
    "randomized_phi_from_counts",
    "block_outcomes",
    "phi_statistics",
    "check_sample_size",
]

_LIMIT_TOL = 1e-9


class DomainError(ValidationError):
    """A phi argument fell outside phi's domain."""

    def __init__(self, cell: int, argument: float, hint: str = ""):
        self.cell = cell
        self.argument = argument
        msg = f"cell {cell}: phi argument {argument!r} is outside the domain of phi"
        super().__init__(msg + (f"; {hint}" if hint else ""))


@dataclass(frozen=True)
class PhiSpec:
    """A divergence generator phi with the constants the theory needs.

    ``domain_min``/``domain_open`` describe where ``evaluate`` is defined:
    [domain_min, inf) or (domain_min, inf).
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    second_deriv_at_one: float
    third_deriv_at_one: float
    lipschitz: float
    radius: float
    domain_min: float = 0.0
    domain_open: bool = False
    name: str = "custom"

    def in_domain(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if self.domain_open:
            return u > self.domain_min
        return u >= self.domain_min


@dataclass(frozen=True)
class SampleSizeReport:
    """Sample-size conditions (i)-(iii) for the randomized rate guarantee.

    Each margin is left-hand side minus right-hand side; a condition holds
    when its margin is <= 0.
    """

    condition1_holds: bool
    condition2_holds: bool
    condition3_holds: bool
    margins: tuple[float, float, float]

    @property
    def all_hold(self) -> bool:
        return self.condition1_holds and self.condition2_holds and self.condition3_holds


@dataclass(frozen=True)
class GofTestResult:
    statistic: float
    df: int
    p_value: float
    randomized: bool
    weights_used: Optional[UnitWeights] = None
    assumption_report: Optional[SampleSizeReport] = None
    # some argument was negative, where phi need not be convex or nonnegative
    outside_convex_range: bool = False


def _power_evaluator(lam: float) -> Callable[[np.ndarray], np.ndarray]:
    if abs(lam + 1.0) < _LIMIT_TOL:

        def f(u):
            u = np.asarray(u, dtype=np.float64)
            return -np.log(u) + u - 1.0

        return f
    if abs(lam) < _LIMIT_TOL:

        def f(u):
            u = np.asarray(u, dtype=np.float64)
            return xlogy(u, u) - u + 1.0

        return f

    mu = lam + 1.0
    polynomial = lam > 0 and float(lam).is_integer()

    def f(u):
        u = np.asarray(u, dtype=np.float64)
        out = np.empty(u.shape)
        pos = u > 0
        up = u[pos]
        logu = np.log(up)
        # expm1 forms keep precision as lam -> 0 or lam -> -1
        if abs(lam) <= abs(mu):
            out[pos] = (up * np.expm1(lam * logu) / lam - (up - 1.0)) / mu
        else:
            out[pos] = (np.expm1(mu * logu) / mu - (up - 1.0)) / lam
        zero = u == 0
        out[zero] = 1.0 / mu if mu > 0 else np.inf
        neg = u < 0
        if polynomial:
            un = u[neg]
            out[neg] = (un ** int(mu) - mu * (un - 1.0) - 1.0) / (lam * mu)
        else:
            out[neg] = np.nan
        return out

    return f


def phi_lambda(lam: float) -> PhiSpec:
    """Power-divergence generator phi_lambda with its Lipschitz constants.

    lam = 1 is Pearson, 0 the log-likelihood ratio, -1 the modified
    log-likelihood ratio, -1/2 Freeman-Tukey, 2/3 Cressie-Read.
    """
    lam = float(lam)
    if lam in (1.0, 2.0):
        lipschitz, radius = 0.0, math.inf
    elif lam >= 3.0:
        lipschitz, radius = math.e * (lam - 1.0) * (lam - 2.0), 1.0 / (lam - 2.0)
    else:
        lipschitz, radius = math.e**2 * abs((lam - 1.0) * (lam - 2.0)), 1.0 / (5.0 - lam)

    if lam > 0 and lam.is_integer():
        domain_min, domain_open = -math.inf, False
    elif lam > -1.0 and abs(lam + 1.0) >= _LIMIT_TOL:
        domain_min, domain_open = 0.0, False
    else:
        domain_min, domain_open = 0.0, True
    return PhiSpec(
        evaluate=_power_evaluator(lam),
        second_deriv_at_one=1.0,
        third_deriv_at_one=lam - 1.0,
        lipschitz=lipschitz,
        radius=radius,
        domain_min=domain_min,
        domain_open=domain_open,
        name=f"power_divergence(lambda={lam:g})",
    )


def third_derivative(f: Callable, u, h: float = 5e-3):
    """phi''' by a central 5-point stencil, Richardson-extrapolated in h."""
    u = np.asarray(u, dtype=np.float64)

    def stencil(s):
        return (f(u + 2 * s) - 2 * f(u + s) + 2 * f(u - s) - f(u - 2 * s)) / (2 * s**3)

    coarse, fine = stencil(h), stencil(h / 2)
    return fine + (fine - coarse) / 3.0


def _grid_interval(phi: PhiSpec, cap: float = 10.0) -> tuple[float, float]:
    return 1.0 - min(phi.radius, 0.9), 1.0 + min(phi.radius, cap)


def lipschitz_excess(phi: PhiSpec, points: int = 1000) -> float:
    """max over a grid of |phi'''(u) - phi'''(1)| - L |u - 1|.

    The grid spans [1 - min(radius, 0.9), 1 + radius] (an infinite radius is
    capped at 10). A value <= the finite-difference slack certifies the
    Lipschitz constant on the grid.
    """
    lo, hi = _grid_interval(phi)
    u = np.linspace(lo, hi, points)
    # stencil reaches 2h = 0.01 left of lo >= 0.1, still inside (0, inf)
    d3 = third_derivative(phi.evaluate, u)
    d3_one = third_derivative(phi.evaluate, 1.0)
    return float(np.max(np.abs(d3 - d3_one) - phi.lipschitz * np.abs(u - 1.0)))


def custom_phi(
    evaluate: Callable,
    second_deriv_at_one: float,
    third_deriv_at_one: float,
    lipschitz: float,
    radius: float,
    *,
    domain_min: float = 0.0,
    domain_open: bool = False,
    name: str = "custom",
    tol: float = 1e-5,
    lipschitz_slack: float = 1e-4,
) -> PhiSpec:
    """Build a PhiSpec from user-supplied metadata, checked numerically at u = 1."""
    if not second_deriv_at_one > 0:
        raise ValidationError("phi''(1) must be positive")
    if not radius > 0 or lipschitz < 0:
        raise ValidationError("need radius > 0 and lipschitz >= 0")
    f = lambda u: np.asarray(evaluate(np.asarray(u, dtype=np.float64)), dtype=np.float64)  # noqa: E731
    at_one = float(f(1.0))
    if abs(at_one) > 1e-12:
        raise ValidationError(f"phi(1) = {at_one!r}, must be 0")
    h = 1e-4
    d1 = float((f(1 + h) - f(1 - h)) / (2 * h))
    if abs(d1) > 1e-6:
        raise ValidationError(f"phi'(1) ~ {d1!r} by central difference, must be 0")
    d2 = float((f(1 + h) - 2 * at_one + f(1 - h)) / h**2)
    if abs(d2 - second_deriv_at_one) > tol * max(1.0, abs(second_deriv_at_one)):
        raise ValidationError(f"phi''(1) ~ {d2!r} numerically, declared {second_deriv_at_one!r}")
    d3 = float(third_derivative(f, 1.0))
    if abs(d3 - third_deriv_at_one) > tol * max(1.0, abs(third_deriv_at_one)):
        raise ValidationError(f"phi'''(1) ~ {d3!r} numerically, declared {third_deriv_at_one!r}")
    spec = PhiSpec(
        f,
        float(second_deriv_at_one),
        float(third_deriv_at_one),
        float(lipschitz),
        float(radius),
        domain_min=float(domain_min),
        domain_open=domain_open,
        name=name,
    )
    excess = lipschitz_excess(spec)
    if excess > lipschitz_slack:
        raise ValidationError(f"phi''' is not {lipschitz}-Lipschitz near 1 (excess {excess:.3g})")
    return spec


def _check_p(p: ProbabilityVector, r: int) -> None:
    if p.r != r:
        raise ValidationError(f"null has r = {p.r} categories, data has r = {r}")


def _assemble(args: np.ndarray, p: np.ndarray, n: int, phi: PhiSpec) -> float:
    ok = phi.in_domain(args)
    if not np.all(ok):
        j = int(np.flatnonzero(~ok)[0])
        raise DomainError(
            j + 1,
            float(args[j]),
            "n is likely too small for p_min; see check_sample_size",
        )
    vals = phi.evaluate(args)
    return float(2.0 * n / phi.second_deriv_at_one * np.dot(p, vals))


def _result(stat, r, theta=None, report=None, negative=False) -> GofTestResult:
    df = r - 1
    return GofTestResult(
        statistic=stat,
        df=df,
        p_value=chi2_survival(ChiSquare(df), stat),
        randomized=theta is not None,
        weights_used=theta,
        assumption_report=report,
        outside_convex_range=negative,
    )


def classical_phi_statistic(counts: CountVector, p: ProbabilityVector, phi: PhiSpec) -> GofTestResult:
    _check_p(p, counts.r)
    n = counts.n
    args = counts.counts / (n * p.entries)
    return _result(_assemble(args, p.entries, n, phi), p.r)


def _outcome_indices(outcomes, r: int) -> np.ndarray:
    o = np.asarray(outcomes)
    if o.ndim != 1 or o.size < 1:
        raise ValidationError("outcomes must be a non-empty sequence")
    if o.dtype.kind == "f" and np.any(o != np.round(o)):
        raise ValidationError("outcomes must be integer category indices")
    o = o.astype(np.int64)
    bad = np.flatnonzero((o < 1) | (o > r))
    if bad.size:
        raise ValidationError(f"outcome {bad[0] + 1}: category {o[bad[0]]} not in 1..{r}")
    return o


def weighted_multinomial_sum(outcomes, p: ProbabilityVector, theta: UnitWeights) -> np.ndarray:
    """X_j = sum_{i: outcome_i = j} theta_i - p_j sum_i theta_i."""
    o = _outcome_indices(outcomes, p.r)
    if o.size != theta.n:
        raise ValidationError(f"theta has length {theta.n}, expected n = {o.size}")
    w = theta.weights
    return np.bincount(o - 1, weights=w, minlength=p.r) - p.entries * w.sum()


def _arguments(x, n: int, p: np.ndarray) -> np.ndarray:
    """1 + X_j / (sqrt(n) p_j), with values within rounding of 0 set to 0.

    phi can have unbounded slope at 0 (u^(lam+1) with -1 < lam < 0), so an
    empty cell must land on 0 exactly, not on a residue of order 1e-17.
    """
    ratio = x / (math.sqrt(n) * p)
    args = 1.0 + ratio
    args[np.abs(args) <= 8 * np.finfo(float).eps * (1.0 + np.abs(ratio))] = 0.0
    return args


def randomized_phi_statistic(
    outcomes, p: ProbabilityVector, phi: PhiSpec, theta: UnitWeights
) -> GofTestResult:
    x = weighted_multinomial_sum(outcomes, p, theta)
    n = theta.n
    args = _arguments(x, n, p.entries)
    stat = _assemble(args, p.entries, n, phi)
    report = check_sample_size(n, p, phi) if n >= 2 else None
    return _result(stat, p.r, theta, report, bool(np.any(args < 0)))


def block_outcomes(counts: CountVector) -> np.ndarray:
    """Canonical outcome sequence: Y_1 ones, then Y_2 twos, and so on."""
    return np.repeat(np.arange(1, counts.r + 1), counts.counts)


def randomized_phi_from_counts(
    counts: CountVector, p: ProbabilityVector, phi: PhiSpec, rng: RandomSource
) -> GofTestResult:
    """Randomized statistic when only the aggregated counts are observed."""
    _check_p(p, counts.r)
    theta = sample_sphere(counts.n, rng)
    return randomized_phi_statistic(block_outcomes(counts), p, phi, theta)


def phi_statistics(outcomes: np.ndarray, p: ProbabilityVector, phi: PhiSpec, theta=None):
    """Vectorized statistic over a (B, n) batch of 1-based outcomes.

    ``theta`` is None (classical), a shared length-n vector, or (B, n).
    Returns ``(statistics, valid)``; rows with an argument outside phi's
    domain get ``valid = False`` and a NaN statistic.
    """
    b, n = outcomes.shape
    pe = p.entries
    if theta is None:
        counts = np.stack([(outcomes == j + 1).sum(axis=1) for j in range(p.r)], axis=1)
        args = counts / (n * pe)
    else:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.ndim == 1:
            s = np.stack([(outcomes == j + 1) @ theta for j in range(p.r)], axis=1)
            total = theta.sum()
        else:
            s = np.stack([((outcomes == j + 1) * theta).sum(axis=1) for j in range(p.r)], axis=1)
            total = theta.sum(axis=1)[:, None]
        args = _arguments(s - pe * total, n, pe)
    valid = np.all(phi.in_domain(args), axis=1)
    safe = np.where(valid[:, None], args, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        stats = 2.0 * n / phi.second_deriv_at_one * (phi.evaluate(safe) @ pe)
    return np.where(valid, stats, np.nan), valid


def check_sample_size(n: int, p: ProbabilityVector, phi: PhiSpec) -> SampleSizeReport:
    """Evaluate the three sample-size inequalities behind the O(1/n) rate.

    (i)   5 |phi'''(1)| (p_j (1 - p_j) + log n) <= 4 phi''(1) sqrt(n) p_j, all j
    (ii)  5 log n <= 2 p_min radius sqrt(n)
    (iii) 16 r^3 + 16 r^2 log n <= n p_min
    """
    if n < 2:
        raise ValidationError("sample-size conditions need n >= 2")
    pe, r, pmin = p.entries, p.r, p.p_min
    logn, rootn = math.log(n), math.sqrt(n)
    m1 = float(np.max(
        5.0 * abs(phi.third_deriv_at_one) * (pe * (1.0 - pe) + logn)
        - 4.0 * phi.second_deriv_at_one * rootn * pe
    ))
    m2 = -math.inf if math.isinf(phi.radius) else 5.0 * logn - 2.0 * pmin * phi.radius * rootn
    m3 = 16.0 * r**3 + 16.0 * r**2 * logn - n * pmin
    return SampleSizeReport(m1 <= 0, m2 <= 0, m3 <= 0, (m1, m2, m3))
