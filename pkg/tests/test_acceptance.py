"""Acceptance gate: the ten primary criteria at their stated tolerances.

Each criterion prints one ``PASS``/``FAIL`` line (collected into the pytest
terminal summary by conftest.py). Run standalone with
``python3 tests/test_acceptance.py`` for the same lines without pytest.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import chi2 as scipy_chi2
from scipy.stats import ks_2samp

from randstat.chi2 import ChiSquare, chi2_cdf, chi2_quantile
from randstat.core import (
    CountVector,
    ProbabilityVector,
    RandomSource,
    UnitWeights,
    sample_multinomial,
    sample_outcomes,
    sample_rankings,
    sample_sphere,
)
from randstat.gof import (
    DomainError,
    classical_phi_statistic,
    phi_lambda,
    randomized_phi_from_counts,
    randomized_phi_statistic,
    weighted_multinomial_sum,
)
from randstat.montecarlo import (
    ExperimentConfig,
    StatisticSpec,
    calibration_check,
    empirical_ks_distance,
    run_experiment,
)
from randstat.rank import (
    brown_mood_score,
    classical_rank_statistic,
    friedman_score,
    make_score,
    randomized_rank_statistic,
    rank_statistics,
)

RESULTS: list[str] = []
WORKERS = os.cpu_count() or 1


def report(number: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
    RESULTS.append(line)
    print(line)


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# --- 1 --------------------------------------------------------------------


def check_equal_weights():
    t0 = time.perf_counter()
    rng = RandomSource(2024)
    worst = {}
    for family in ("friedman", "brown_mood", "custom"):
        err = 0.0
        for _ in range(500):
            n, r = int(rng.below(60)) + 1, int(rng.below(6)) + 2
            rankings = sample_rankings(n, r, rng)
            if family == "friedman":
                score = friedman_score(r)
            elif family == "brown_mood":
                score = brown_mood_score(r, int(rng.below(r - 1)) + 1)
            else:
                score = make_score(rng.normal(r))
            a = randomized_rank_statistic(rankings, score, UnitWeights.equal(n)).statistic
            b = classical_rank_statistic(rankings, score).statistic
            err = max(err, rel_err(a, b) if b > 1e-12 else abs(a - b))
        worst[family] = err
    for lam in (-1.0, -0.5, 0.0, 2 / 3, 1.0, 2.0, 3.0):
        err, done = 0.0, 0
        phi = phi_lambda(lam)
        while done < 500:
            r = int(rng.below(5)) + 2
            w = rng.uniform(r) + 0.1
            p = ProbabilityVector(w / w.sum())
            n = int(rng.below(200)) + 2
            outcomes = sample_outcomes(p, n, rng)
            counts = CountVector(np.bincount(outcomes - 1, minlength=r))
            if lam <= -1 and np.any(counts.counts == 0):
                continue
            a = randomized_phi_statistic(outcomes, p, phi, UnitWeights.equal(n)).statistic
            b = classical_phi_statistic(counts, p, phi).statistic
            err = max(err, rel_err(a, b) if b > 1e-12 else abs(a - b))
            done += 1
        worst[f"lambda={lam:.3g}"] = err
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    ok = top <= 1e-10 and elapsed < 10
    report(1, ok, f"equal-weights reduction, worst rel err {top:.2e} over 10 families x 500 ({elapsed:.1f} s)")
    return ok


# --- 2 --------------------------------------------------------------------


def check_conditional_mean():
    t0 = time.perf_counter()
    rankings = sample_rankings(30, 4, RandomSource(7))
    score = friedman_score(4)
    classical = classical_rank_statistic(rankings, score).statistic
    m, block = 100_000, 10_000
    theta = sample_sphere(30, RandomSource(8), size=m)
    batch = np.broadcast_to(rankings.rows, (block, 30, 4))
    draws = np.concatenate([rank_statistics(batch, score, theta[s:s + block]) for s in range(0, m, block)])
    se = draws.std(ddof=1) / math.sqrt(m)
    gap = abs(draws.mean() - classical)
    elapsed = time.perf_counter() - t0
    ok = gap <= 4 * se and elapsed < 30
    report(2, ok, f"mean over theta {draws.mean():.4f} vs classical {classical:.4f}, "
                  f"|gap| = {gap / se:.1f} SE (limit 4; {elapsed:.1f} s)")
    return ok


# --- 3 --------------------------------------------------------------------


def check_pearson_identity():
    rng = RandomSource(33)
    phi = phi_lambda(1)
    err = 0.0
    for _ in range(1000):
        r = int(rng.below(6)) + 2
        w = rng.uniform(r) + 0.05
        p = ProbabilityVector(w / w.sum())
        n = int(rng.below(300)) + 1
        outcomes = sample_outcomes(p, n, rng)
        theta = sample_sphere(n, rng)
        stat = randomized_phi_statistic(outcomes, p, phi, theta).statistic
        x = weighted_multinomial_sum(outcomes, p, theta)
        want = float(np.sum(x**2 / p.entries))
        err = max(err, rel_err(stat, want))
    ok = err <= 1e-10
    report(3, ok, f"Pearson identity, worst rel err {err:.2e} over 1000 instances")
    return ok


# --- 4 --------------------------------------------------------------------


def check_aggregated_trick():
    t0 = time.perf_counter()
    p = ProbabilityVector.uniform(3)
    phi = phi_lambda(0)
    rng_counts, rng_outcomes = RandomSource(41), RandomSource(42)
    from_counts, from_outcomes = [], []
    for _ in range(10_000):
        try:
            from_counts.append(randomized_phi_from_counts(
                sample_multinomial(p, 100, rng_counts), p, phi, rng_counts).statistic)
        except DomainError:
            pass
        outcomes = sample_outcomes(p, 100, rng_outcomes)
        try:
            from_outcomes.append(randomized_phi_statistic(
                outcomes, p, phi, sample_sphere(100, rng_outcomes)).statistic)
        except DomainError:
            pass
    pval = ks_2samp(from_counts, from_outcomes).pvalue
    elapsed = time.perf_counter() - t0
    ok = pval > 1e-3 and elapsed < 120
    report(4, ok, f"counts vs outcomes KS p-value {pval:.3f} (limit 0.001; kept "
                  f"{len(from_counts)}/{len(from_outcomes)}; {elapsed:.1f} s)")
    return ok


# --- 5 --------------------------------------------------------------------


def check_rate_separation():
    t0 = time.perf_counter()
    rand = run_experiment(ExperimentConfig(statistic=StatisticSpec("randomized_rank", r=4)), workers=WORKERS)
    classical = run_experiment(ExperimentConfig(statistic=StatisticSpec("classical_phi", r=3, lam=0.0)),
                               workers=WORKERS)
    elapsed = time.perf_counter() - t0
    ok = rand.slope <= -0.8 and classical.slope >= -0.85 and rand.slope < classical.slope
    noisy = [pt.n for pt in rand.points if pt.noise_limited]
    report(5, ok, f"slopes randomized {rand.slope:.3f} (need <= -0.8), classical {classical.slope:.3f} "
                  f"(need >= -0.85); randomized d_K {[round(pt.dk, 5) for pt in rand.points]}, "
                  f"noise-limited n {noisy} ({elapsed:.0f} s)")
    return ok


# --- 6 --------------------------------------------------------------------


def check_calibration():
    rate = calibration_check(StatisticSpec("randomized_rank", r=3), 200, 100_000, 0.05, RandomSource(6),
                             workers=WORKERS)
    ok = 0.045 <= rate <= 0.055
    report(6, ok, f"randomized Friedman type-I error {rate:.4f} (need [0.045, 0.055])")
    return ok


# --- 7 --------------------------------------------------------------------


def fd_third(f, u, h):
    """Seven-point central stencil, O(h^4)."""
    c = (-1 / 8, 1.0, -13 / 8, 0.0, 13 / 8, -1.0, 1 / 8)
    return sum(ck * f(u + k * h) for ck, k in zip(c, range(-3, 4))) / h**3


def stated_constants(lam):
    if lam in (1, 2):
        return 0.0, math.inf
    if lam >= 3:
        return math.e * (lam - 1) * (lam - 2), 1 / (lam - 2)
    return math.e**2 * abs((lam - 1) * (lam - 2)), 1 / (5 - lam)


def check_lipschitz():
    worst, lines, consts_ok = -math.inf, [], True
    for lam in (-1.0, 0.0, 0.5, 3.0, 4.0):
        phi = phi_lambda(lam)
        big_l, delta = stated_constants(lam)
        consts_ok &= math.isclose(phi.lipschitz, big_l, rel_tol=1e-15) and math.isclose(phi.radius, delta, rel_tol=1e-15)
        u = np.linspace(1 - min(delta, 0.9), 1 + delta, 2001)
        h = np.minimum(1e-2, u / 8)
        d3 = fd_third(phi.evaluate, u, h)
        d3_one = float(fd_third(phi.evaluate, np.array([1.0]), 1e-2)[0])
        excess = float(np.max(np.abs(d3 - d3_one) - big_l * np.abs(u - 1)))
        worst = max(worst, excess)
        lines.append(f"{lam:g}:{excess:.2g}")
    ok = worst <= 1e-4 and consts_ok
    report(7, ok, f"Lipschitz certificates, constants {'match' if consts_ok else 'DIFFER'}, max excess {worst:.3g} (limit 1e-4) [{', '.join(lines)}]")
    return ok


# --- 8 --------------------------------------------------------------------


def quad_cdf(df, t):
    a = df / 2.0
    logc = -a * math.log(2.0) - math.lgamma(a)

    def integrand(s):
        x = s * s
        if x == 0.0:
            return 2.0 * math.exp(logc) if df == 1 else 0.0
        return 2.0 * s * math.exp(logc + (a - 1.0) * math.log(x) - x / 2.0)

    return quad(integrand, 0.0, math.sqrt(t), epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def check_special_functions():
    cdf_err, rt_err = 0.0, 0.0
    for df in range(1, 11):
        d = ChiSquare(df)
        ts = np.linspace(0.01, 4 * df + 30, 100)
        want = np.array([quad_cdf(df, t) for t in ts])
        cdf_err = max(cdf_err, float(np.max(np.abs(chi2_cdf(d, ts) - want))))
        qs = np.concatenate([[1e-6, 1e-3], np.linspace(0.01, 0.99, 99), [0.999, 1 - 1e-6]])
        rt_err = max(rt_err, float(np.max(np.abs(chi2_cdf(d, chi2_quantile(d, qs)) - qs))))
    ok = cdf_err <= 1e-10 and rt_err <= 1e-8
    report(8, ok, f"chi2_cdf vs quadrature max err {cdf_err:.2e}, quantile round trip {rt_err:.2e}")
    return ok


# --- 9 --------------------------------------------------------------------


def brute_sup(x, df):
    x = np.sort(x)
    m = x.size
    grid = np.linspace(max(x[0] - 1.0, 0.0), x[-1] + 1.0, 1_000_000)
    best = np.max(np.abs(np.searchsorted(x, grid, side="right") / m - scipy_chi2.cdf(grid, df)))
    f = scipy_chi2.cdf(x, df)
    # the step function jumps at each atom; both one-sided limits are attained sup candidates
    best = max(best, np.max(np.abs(np.searchsorted(x, x, side="right") / m - f)))
    return max(best, np.max(np.abs(np.searchsorted(x, x, side="left") / m - f)))


def check_ks_distance():
    gen = np.random.default_rng(99)
    err = 0.0
    for _ in range(100):
        m, df = int(gen.integers(1, 51)), int(gen.integers(1, 8))
        x = gen.chisquare(df, size=m)
        err = max(err, abs(empirical_ks_distance(x, ChiSquare(df)) - brute_sup(x, df)))
    ok = err <= 1e-9
    report(9, ok, f"sorted-sample KS vs grid sup, max diff {err:.2e} over 100 samples")
    return ok


# --- 10 -------------------------------------------------------------------


def check_reproducibility(tmp):
    outputs = {}
    for workers in (1, 1, 8, 8):
        tag = f"w{workers}_{len(outputs)}"
        path = os.path.join(tmp, f"{tag}.csv")
        cmd = [sys.executable, "-m", "randstat.cli", "simulate", "--seed", "20240917",
               "--replicates", "20000", "--workers", str(workers), "--output", path]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            report(10, False, f"simulate exited {proc.returncode}: {proc.stderr.strip()}")
            return False
        with open(path, "rb") as a, open(path[:-4] + ".json", "rb") as b:
            outputs[tag] = (a.read(), b.read())
    ok = len(set(outputs.values())) == 1
    report(10, ok, f"simulate outputs byte-identical across {len(outputs)} runs at workers 1 and 8")
    return ok


# --- pytest entry points ----------------------------------------------------


def test_criterion_01_equal_weights():
    assert check_equal_weights()


def test_criterion_02_conditional_mean():
    assert check_conditional_mean()


def test_criterion_03_pearson_identity():
    assert check_pearson_identity()


def test_criterion_04_aggregated_counts():
    assert check_aggregated_trick()


@pytest.mark.slow
def test_criterion_05_rate_separation():
    assert check_rate_separation()


def test_criterion_06_calibration():
    assert check_calibration()


def test_criterion_07_lipschitz():
    assert check_lipschitz()


def test_criterion_08_special_functions():
    assert check_special_functions()


def test_criterion_09_ks_distance():
    assert check_ks_distance()


def test_criterion_10_reproducibility(tmp_path):
    assert check_reproducibility(str(tmp_path))


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        checks = [check_equal_weights, check_conditional_mean, check_pearson_identity, check_aggregated_trick,
                  check_rate_separation, check_calibration, check_lipschitz, check_special_functions,
                  check_ks_distance, lambda: check_reproducibility(tmp)]
        passed = sum(bool(c()) for c in checks)
    print(f"{passed}/{len(checks)} criteria passed")
    sys.exit(0 if passed == len(checks) else 1)
