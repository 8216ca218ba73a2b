"""Method-of-n-rankings statistics, classical and externally randomized.

For a score map J on ranks 1..r with mean Jbar and variance s2 (divisor r-1),
the classical statistic is

    T = || sum_i (V_i - Jbar 1) ||^2 / (s2 * n),     V_i = (J(pi_i1), ..., J(pi_ir)),

and the randomized one replaces the implicit weights 1/sqrt(n) by a point
theta of the unit sphere:

    T_theta = || sum_i theta_i (V_i - Jbar 1) ||^2 / s2.

Both are referred to chi2(r - 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chi2 import ChiSquare, chi2_survival
from .core import RankingMatrix, UnitWeights, ValidationError

__all__ = [
    "ScoreFunction",
    "RankTestResult",
    "make_score",
    "friedman_score",
    "brown_mood_score",
    "score_vectors",
    "classical_rank_statistic",
    "randomized_rank_statistic",
    "rank_statistics",
    "friedman",
    "brown_mood",
]


@dataclass(frozen=True)
class ScoreFunction:
    """Score map J(1..r) with its mean, variance and sup-deviation B."""

    values: np.ndarray
    mean: float
    variance: float
    bound: float

    @property
    def r(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class RankTestResult:
    statistic: float
    df: int
    p_value: float
    randomized: bool
    weights_used: Optional[UnitWeights] = None


def make_score(values) -> ScoreFunction:
    v = np.array(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise ValidationError(f"a score needs r >= 2 values, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("score values must be finite")
    mean = float(v.mean())
    dev = v - mean
    variance = float(dev @ dev / (v.size - 1))
    if variance <= 0.0 or np.all(v == v[0]):
        raise ValidationError("degenerate score: all values equal, variance is zero")
    v.setflags(write=False)
    return ScoreFunction(v, mean, variance, float(np.abs(dev).max()))


def friedman_score(r: int) -> ScoreFunction:
    """J(k) = k."""
    return make_score(np.arange(1, r + 1))


def brown_mood_score(r: int, a: int) -> ScoreFunction:
    """J(k) = 1(k <= a), a in 1..r-1."""
    if not 1 <= a <= r - 1:
        raise ValidationError(f"Brown-Mood cut a must lie in 1..{r - 1}, got {a}")
    return make_score((np.arange(1, r + 1) <= a).astype(np.float64))


def _check_dims(rankings: RankingMatrix, score: ScoreFunction) -> None:
    if rankings.r != score.r:
        raise ValidationError(f"rankings have r = {rankings.r} but the score has r = {score.r}")


def score_vectors(rankings: RankingMatrix, score: ScoreFunction) -> np.ndarray:
    """n x r matrix with entry (i, j) = J(pi_ij)."""
    _check_dims(rankings, score)
    return score.values[rankings.rows - 1]


def rank_statistics(ranks: np.ndarray, score: ScoreFunction, theta=None) -> np.ndarray:
    """Vectorized statistic over a batch of ranking matrices.

    ``ranks`` has shape (B, n, r). ``theta`` is None (classical), a length-n
    vector shared by the batch, or a (B, n) array of per-replicate weights.
    """
    centered = score.values[ranks - 1] - score.mean
    n = ranks.shape[1]
    if theta is None:
        s = centered.sum(axis=1)
        return np.einsum("br,br->b", s, s) / (score.variance * n)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim == 1:
        s = np.einsum("bnr,n->br", centered, theta)
    else:
        s = np.einsum("bnr,bn->br", centered, theta)
    return np.einsum("br,br->b", s, s) / score.variance


def _result(stat: float, r: int, theta: Optional[UnitWeights]) -> RankTestResult:
    df = r - 1
    return RankTestResult(
        statistic=stat,
        df=df,
        p_value=chi2_survival(ChiSquare(df), stat),
        randomized=theta is not None,
        weights_used=theta,
    )


def classical_rank_statistic(rankings: RankingMatrix, score: ScoreFunction) -> RankTestResult:
    _check_dims(rankings, score)
    stat = float(rank_statistics(rankings.rows[None], score)[0])
    return _result(stat, rankings.r, None)


def randomized_rank_statistic(
    rankings: RankingMatrix, score: ScoreFunction, theta: UnitWeights
) -> RankTestResult:
    _check_dims(rankings, score)
    if theta.n != rankings.n:
        raise ValidationError(f"theta has length {theta.n}, expected n = {rankings.n}")
    stat = float(rank_statistics(rankings.rows[None], score, theta.weights)[0])
    return _result(stat, rankings.r, theta)


def _dispatch(rankings, score, theta):
    if theta is None:
        return classical_rank_statistic(rankings, score)
    return randomized_rank_statistic(rankings, score, theta)


def friedman(rankings: RankingMatrix, theta: Optional[UnitWeights] = None) -> RankTestResult:
    """Friedman's test; randomized when ``theta`` is given."""
    return _dispatch(rankings, friedman_score(rankings.r), theta)


def brown_mood(
    rankings: RankingMatrix, a: int, theta: Optional[UnitWeights] = None
) -> RankTestResult:
    """Brown-Mood's test with cut ``a``; randomized when ``theta`` is given."""
    return _dispatch(rankings, brown_mood_score(rankings.r, a), theta)
