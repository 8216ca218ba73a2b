"""Monte Carlo harness: Kolmogorov distance to chi2(r-1) across sample sizes.

Replicates are split into fixed-size blocks. Block ``b`` at grid index ``g``
draws its data from sub-stream ``(g, 1, b)`` of the experiment seed; a fixed
theta for grid index ``g`` comes from sub-stream ``(g, 0)``. The split depends
only on the configuration, so results are identical for any worker count.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .chi2 import ChiSquare, chi2_cdf, chi2_quantile
from .core import ProbabilityVector, RandomSource, ValidationError, sample_outcomes, sample_rankings, sample_sphere
from .gof import phi_lambda, phi_statistics
from .rank import friedman_score, make_score, rank_statistics

__all__ = [
    "KINDS",
    "THETA_MODES",
    "ExperimentError",
    "StatisticSpec",
    "ExperimentConfig",
    "GridPoint",
    "ConvergenceReport",
    "empirical_ks_distance",
    "fit_loglog",
    "simulate_null",
    "run_experiment",
    "calibration_check",
]

KINDS = ("classical_rank", "randomized_rank", "classical_phi", "randomized_phi")
THETA_MODES = ("fixed_per_n", "fresh_per_replicate")
MAX_EXCLUDED = 0.05
# elements per vectorized chunk, bounds memory at a few tens of MB
_CHUNK_ELEMS = 1_000_000


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class StatisticSpec:
    """Which statistic to simulate under the null, plus its family parameters.

    Rank kinds use ``score`` (default: Friedman scores 1..r). Phi kinds use
    ``lam`` and ``p`` (default: uniform over r cells).
    """

    kind: str = "randomized_rank"
    r: int = 4
    score: Optional[tuple[float, ...]] = None
    lam: float = 0.0
    p: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ExperimentError(f"unknown statistic kind {self.kind!r}; expected one of {KINDS}")
        if self.score is not None:
            object.__setattr__(self, "score", tuple(float(v) for v in self.score))
            object.__setattr__(self, "r", len(self.score))
        if self.p is not None:
            object.__setattr__(self, "p", tuple(float(v) for v in self.p))
            object.__setattr__(self, "r", len(self.p))
        if self.r < 2:
            raise ExperimentError(f"need r >= 2, got {self.r}")
        # construct once to surface invalid parameters early
        if self.is_rank:
            self.score_function()
        else:
            self.null()

    @property
    def is_rank(self) -> bool:
        return self.kind.endswith("_rank")

    @property
    def randomized(self) -> bool:
        return self.kind.startswith("randomized")

    @property
    def df(self) -> int:
        return self.r - 1

    def score_function(self):
        return friedman_score(self.r) if self.score is None else make_score(self.score)

    def null(self) -> ProbabilityVector:
        return ProbabilityVector.uniform(self.r) if self.p is None else ProbabilityVector(self.p)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.is_rank:
            d["score"] = list(self.score_function().values.tolist())
            del d["lam"], d["p"]
        else:
            d["p"] = list(self.null().entries.tolist())
            del d["score"]
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    statistic: StatisticSpec = field(default_factory=StatisticSpec)
    n_grid: tuple[int, ...] = (64, 128, 256, 512)
    replicates: int = 200_000
    theta_mode: str = "fixed_per_n"
    seed: int = 0
    block_size: int = 10_000

    def __post_init__(self) -> None:
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if len(grid) < 3:
            raise ExperimentError(f"need >= 3 grid points to fit a slope, got {len(grid)}")
        if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ExperimentError(f"n_grid must be strictly increasing positive integers: {grid}")
        if self.replicates < 1000:
            raise ExperimentError(f"need >= 1000 replicates per grid point, got {self.replicates}")
        if self.theta_mode not in THETA_MODES:
            raise ExperimentError(f"theta_mode must be one of {THETA_MODES}, got {self.theta_mode!r}")
        if self.block_size < 1:
            raise ExperimentError("block_size must be positive")

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic.to_dict(),
            "n_grid": list(self.n_grid),
            "replicates": self.replicates,
            "theta_mode": self.theta_mode,
            "seed": self.seed,
            "block_size": self.block_size,
        }


@dataclass(frozen=True)
class GridPoint:
    n: int
    dk: float
    se: float
    excluded_frac: float
    noise_limited: bool


@dataclass(frozen=True)
class ConvergenceReport:
    points: list[GridPoint]
    slope: float
    intercept: float
    residuals: list[float]
    config: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,dk,se,excluded_frac\n")
        for pt in self.points:
            buf.write(f"{pt.n},{pt.dk:.17g},{pt.se:.17g},{pt.excluded_frac:.17g}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        body = {
            "slope": self.slope,
            "intercept": self.intercept,
            "residuals": self.residuals,
            "points": [asdict(pt) for pt in self.points],
            "config": self.config,
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def empirical_ks_distance(samples, dist: ChiSquare) -> float:
    """sup_t |F_M(t) - F(t)| for the empirical CDF F_M of ``samples``."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    m = x.size
    if m == 0:
        raise ValidationError("empirical_ks_distance needs at least one sample")
    f = chi2_cdf(dist, x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))


def fit_loglog(ns, dks) -> tuple[float, float, list[float]]:
    """OLS of log d_K on log n; returns (slope, intercept, residuals)."""
    lx = np.log(np.asarray(ns, dtype=np.float64))
    dks = np.asarray(dks, dtype=np.float64)
    if np.any(dks <= 0):
        raise ExperimentError("cannot fit a log-log slope through a zero distance")
    ly = np.log(dks)
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), resid.tolist()


def simulate_null(spec: StatisticSpec, n: int, count: int, rng: RandomSource, theta=None) -> np.ndarray:
    """``count`` null draws of the statistic at sample size n.

    ``theta`` is a fixed weight vector, or None. For randomized kinds with
    theta None, fresh sphere weights are drawn per replicate. Excluded
    replicates (phi argument outside the domain) come back as NaN.
    """
    r = spec.r
    rows = max(1, _CHUNK_ELEMS // (n * r))
    out = np.empty(count)
    if spec.is_rank:
        score = spec.score_function()
    else:
        p = spec.null()
        phi = phi_lambda(spec.lam)
    for start in range(0, count, rows):
        b = min(rows, count - start)
        if spec.is_rank:
            data = sample_rankings(n, r, rng, size=b)
        else:
            data = sample_outcomes(p, n, rng, size=b)
        if not spec.randomized:
            w = None
        elif theta is not None:
            w = theta
        else:
            w = sample_sphere(n, rng, size=b)
        if spec.is_rank:
            out[start:start + b] = rank_statistics(data, score, w)
        else:
            out[start:start + b], _ = phi_statistics(data, p, phi, w)
    return out


def _block_task(args):
    spec, n, count, seed, stream, theta = args
    return simulate_null(spec, n, count, RandomSource(seed, stream), theta)


def _blocks(total: int, size: int) -> list[int]:
    return [min(size, total - s) for s in range(0, total, size)]


def _gather(tasks, workers: int) -> np.ndarray:
    if workers <= 1 or len(tasks) <= 1:
        parts = [_block_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_task, tasks))
    return np.concatenate(parts)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ConvergenceReport:
    """Estimate d_K(law of statistic, chi2(r-1)) at each grid n, then fit the log-log slope."""
    spec = config.statistic
    dist = ChiSquare(spec.df)
    base = RandomSource(config.seed)
    points = []
    for g, n in enumerate(config.n_grid):
        theta = None
        if spec.randomized and config.theta_mode == "fixed_per_n":
            theta = sample_sphere(n, base.spawn(g, 0)).weights
        tasks = [
            (spec, n, count, config.seed, base.stream + (g, 1, b), theta)
            for b, count in enumerate(_blocks(config.replicates, config.block_size))
        ]
        stats = _gather(tasks, workers)
        keep = ~np.isnan(stats)
        excluded = 1.0 - keep.mean()
        if excluded > MAX_EXCLUDED:
            raise ExperimentError(
                f"n={n}: {excluded:.1%} of replicates left the domain of phi (limit {MAX_EXCLUDED:.0%})"
            )
        m = int(keep.sum())
        dk = empirical_ks_distance(stats[keep], dist)
        se = 1.0 / math.sqrt(m)
        points.append(GridPoint(n, dk, se, float(excluded), dk < se))
    slope, intercept, resid = fit_loglog([pt.n for pt in points], [pt.dk for pt in points])
    return ConvergenceReport(points, slope, intercept, resid, config.to_dict())


def calibration_check(
    spec: StatisticSpec,
    n: int,
    replicates: int,
    alpha: float,
    rng: RandomSource,
    theta_mode: str = "fresh_per_replicate",
    workers: int = 1,
    block_size: int = 10_000,
) -> float:
    """Empirical type-I error of the chi2(r-1) test at level ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ExperimentError(f"alpha must lie in (0, 1), got {alpha}")
    if theta_mode not in THETA_MODES:
        raise ExperimentError(f"theta_mode must be one of {THETA_MODES}, got {theta_mode!r}")
    if replicates < 1:
        raise ExperimentError("need at least one replicate")
    theta = None
    if spec.randomized and theta_mode == "fixed_per_n":
        theta = sample_sphere(n, rng.spawn(0)).weights
    tasks = [
        (spec, n, count, rng.seed, rng.stream + (1, b), theta)
        for b, count in enumerate(_blocks(replicates, block_size))
    ]
    stats = _gather(tasks, workers)
    keep = ~np.isnan(stats)
    excluded = 1.0 - keep.mean()
    if excluded > MAX_EXCLUDED:
        raise ExperimentError(f"{excluded:.1%} of replicates left the domain of phi")
    critical = chi2_quantile(ChiSquare(spec.df), 1.0 - alpha)
    return float(np.mean(stats[keep] > critical))
