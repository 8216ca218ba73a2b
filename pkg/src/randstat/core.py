"""Validated data types, the seeded random source and the three samplers.

Every sampler draws its variates from :class:`RandomSource`, which turns raw
64-bit PCG64 output into open-interval uniforms and obtains normals by
inverse-CDF transform. One uniform per normal keeps the number of raw draws
per variate fixed, so a seed pins the whole stream on any platform.

Sub-streams: ``RandomSource(seed, stream)`` seeds PCG64 from
``SeedSequence(seed, spawn_key=stream)``. ``source.spawn(*keys)`` appends
``keys`` to the stream tuple, so ``RandomSource(7).spawn(2, 5)`` and
``RandomSource(7, (2, 5))`` are the same stream and distinct from every other
key path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

__all__ = [
    "ValidationError",
    "ProbabilityVector",
    "CountVector",
    "RankingMatrix",
    "UnitWeights",
    "RandomSource",
    "sample_sphere",
    "sample_outcomes",
    "sample_multinomial",
    "sample_rankings",
]

_SUM_TOL = 1e-12
_NORM_TOL = 1e-12
_TINY_NORM = 1e-300
_U64_MASK = (1 << 64) - 1


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProbabilityVector:
    """Null multinomial parameter p = (p_1, ..., p_r)."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.entries, dtype=np.float64).ravel()
        if p.size < 2:
            raise ValidationError(f"need r >= 2 categories, got {p.size}")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValidationError("every probability must be strictly positive")
        if abs(p.sum() - 1.0) > _SUM_TOL:
            raise ValidationError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "entries", _readonly(p))

    @classmethod
    def uniform(cls, r: int) -> ProbabilityVector:
        return cls(np.full(r, 1.0 / r))

    @property
    def r(self) -> int:
        return int(self.entries.size)

    @property
    def p_min(self) -> float:
        return float(self.entries.min())


@dataclass(frozen=True)
class CountVector:
    """Observed multinomial counts Y with total n."""

    counts: np.ndarray
    n: int = -1

    def __post_init__(self) -> None:
        raw = np.asarray(self.counts)
        if raw.ndim != 1 or raw.size < 2:
            raise ValidationError("counts must be a vector with at least 2 cells")
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise ValidationError("counts must be integers")
        elif raw.dtype.kind not in "iu":
            raise ValidationError("counts must be integers")
        y = raw.astype(np.int64)
        if np.any(y < 0):
            raise ValidationError("counts must be nonnegative")
        total = int(y.sum())
        n = total if self.n == -1 else int(self.n)
        if total != n:
            raise ValidationError(f"counts sum to {total}, declared n = {n}")
        if n < 1:
            raise ValidationError("total count n must be at least 1")
        object.__setattr__(self, "counts", _readonly(y))
        object.__setattr__(self, "n", n)

    @property
    def r(self) -> int:
        return int(self.counts.size)


@dataclass(frozen=True)
class RankingMatrix:
    """n rankings of r items; row i is a permutation of 1..r."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.rows)
        if a.ndim != 2 or a.shape[0] < 1:
            raise ValidationError("rankings must be a non-empty 2-D array")
        if a.shape[1] < 2:
            raise ValidationError(f"need r >= 2 items per ranking, got {a.shape[1]}")
        if a.dtype.kind == "f" and np.any(a != np.round(a)):
            raise ValidationError("ranks must be integers")
        a = a.astype(np.int64)
        expected = np.arange(1, a.shape[1] + 1)
        bad = np.flatnonzero(np.any(np.sort(a, axis=1) != expected, axis=1))
        if bad.size:
            raise ValidationError(f"row {bad[0] + 1}: not a permutation of 1..{a.shape[1]}")
        object.__setattr__(self, "rows", _readonly(a))

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def r(self) -> int:
        return int(self.rows.shape[1])


@dataclass(frozen=True)
class UnitWeights:
    """External randomization theta, a point on the unit sphere S^{n-1}."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64).ravel()
        if w.size < 1:
            raise ValidationError("weights must be non-empty")
        norm = float(np.linalg.norm(w))
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValidationError(f"weights have norm {norm!r}, not 1")
        object.__setattr__(self, "weights", _readonly(w))

    @classmethod
    def equal(cls, n: int) -> UnitWeights:
        """The classical weights (1/sqrt(n), ..., 1/sqrt(n))."""
        return cls(np.full(n, 1.0 / np.sqrt(n)))

    @property
    def n(self) -> int:
        return int(self.weights.size)


@dataclass
class RandomSource:
    """Seeded, splittable source of uniform and standard-normal variates.

    Not thread-safe: give each worker its own ``spawn``-ed sub-stream.
    """

    seed: int
    stream: tuple[int, ...] = ()
    _bits: np.random.PCG64 = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.seed = int(self.seed) & _U64_MASK
        self.stream = tuple(int(k) for k in self.stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self._bits = np.random.PCG64(ss)

    def spawn(self, *keys: int) -> RandomSource:
        """Independent sub-stream identified by ``stream + keys``."""
        return RandomSource(self.seed, self.stream + tuple(keys))

    def uniform(self, size=None):
        """Uniforms on the open interval (0, 1), 53-bit resolution."""
        count = 1 if size is None else int(np.prod(size))
        raw = self._bits.random_raw(count)
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return float(u[0]) if size is None else u.reshape(size)

    def normal(self, size=None):
        """Standard normals by inverse-CDF transform of :meth:`uniform`."""
        z = ndtri(self.uniform(size))
        return float(z) if size is None else z

    def below(self, bounds, size=None) -> np.ndarray:
        """Integers uniform on {0, ..., bounds - 1} (bounds broadcast to size)."""
        u = self.uniform(size if size is not None else np.shape(bounds))
        k = np.floor(u * bounds).astype(np.int64)
        return np.minimum(k, np.asarray(bounds) - 1)


def sample_sphere(n: int, rng: RandomSource, size: int | None = None):
    """Uniform draw from S^{n-1} as gamma / ||gamma||, gamma ~ N(0, I_n).

    With ``size`` given, returns a ``(size, n)`` array of independent draws
    instead of a single :class:`UnitWeights`.
    """
    if n < 1:
        raise ValidationError(f"sphere dimension must be >= 1, got {n}")
    rows = 1 if size is None else int(size)
    g = rng.normal((rows, n))
    norms = np.linalg.norm(g, axis=1)
    # measure-zero event; redraw rather than surface it
    while np.any(norms < _TINY_NORM):
        idx = np.flatnonzero(norms < _TINY_NORM)
        g[idx] = rng.normal((idx.size, n))
        norms[idx] = np.linalg.norm(g[idx], axis=1)
    theta = g / norms[:, None]
    if size is None:
        return UnitWeights(theta[0])
    return theta


def sample_outcomes(p: ProbabilityVector, n: int, rng: RandomSource, size: int | None = None):
    """n independent categorical draws, categories numbered 1..r."""
    if n < 1:
        raise ValidationError(f"number of trials must be >= 1, got {n}")
    cdf = np.cumsum(p.entries)
    cdf[-1] = 1.0
    shape = (n,) if size is None else (int(size), n)
    return np.searchsorted(cdf, rng.uniform(shape), side="right") + 1


def sample_multinomial(p: ProbabilityVector, n: int, rng: RandomSource) -> CountVector:
    """Mult(n, p) counts aggregated from n categorical draws."""
    outcomes = sample_outcomes(p, n, rng)
    return CountVector(np.bincount(outcomes - 1, minlength=p.r), n)


def sample_rankings(n: int, r: int, rng: RandomSource, size: int | None = None):
    """n uniform random permutations of 1..r by Fisher-Yates.

    With ``size`` given, returns a raw ``(size, n, r)`` integer array.
    """
    if r < 2:
        raise ValidationError(f"need r >= 2 items per ranking, got {r}")
    if n < 1:
        raise ValidationError(f"need n >= 1 rankings, got {n}")
    shape = (n,) if size is None else (int(size), n)
    perm = np.broadcast_to(np.arange(1, r + 1), shape + (r,)).copy()
    flat = perm.reshape(-1, r)
    rows = np.arange(flat.shape[0])
    for k in range(r - 1, 0, -1):
        j = rng.below(k + 1, size=flat.shape[0])
        tmp = flat[rows, k].copy()
        flat[rows, k] = flat[rows, j]
        flat[rows, j] = tmp
    if size is None:
        return RankingMatrix(perm)
    return perm
