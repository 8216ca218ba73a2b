"""Command-line entry point.

Exit codes: 0 success, 2 user or data error, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .core import CountVector, ProbabilityVector, RandomSource, RankingMatrix, ValidationError, sample_sphere
from .gof import (
    DomainError,
    check_sample_size,
    classical_phi_statistic,
    phi_lambda,
    randomized_phi_from_counts,
    randomized_phi_statistic,
)
from .montecarlo import ExperimentConfig, ExperimentError, StatisticSpec, calibration_check, run_experiment
from .rank import brown_mood_score, classical_rank_statistic, friedman_score, make_score, randomized_rank_statistic

EXIT_OK, EXIT_INTERNAL, EXIT_USER = 0, 1, 2
THETA_MODES = {"fixed": "fixed_per_n", "fresh": "fresh_per_replicate"}


class UserError(Exception):
    pass


# --- parsing helpers -------------------------------------------------------


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_rows(path: str) -> list[list[str]]:
    """Comma-separated rows; a leading non-numeric line is treated as a header."""
    try:
        with open(path, newline="") as fh:
            rows = [[c.strip() for c in row] for row in csv.reader(fh) if any(c.strip() for c in row)]
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc.strerror}") from exc
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise UserError(f"{path}: no data rows")
    return rows


def _int_row(row: list[str], lineno: int) -> list[int]:
    out = []
    for c in row:
        try:
            v = float(c)
        except ValueError:
            raise UserError(f"row {lineno}: {c!r} is not a number") from None
        if not v.is_integer():
            raise UserError(f"row {lineno}: {c!r} is not an integer")
        out.append(int(v))
    return out


def _rect(rows: list[list[str]]) -> None:
    width = len(rows[0])
    for i, row in enumerate(rows, 1):
        if len(row) != width:
            raise UserError(f"row {i}: expected {width} columns, found {len(row)}")


def rankings_from_scores(raw: np.ndarray) -> np.ndarray:
    """Rank raw scores within each row (1 = smallest); exact ties are rejected."""
    for i, row in enumerate(raw, 1):
        if np.unique(row).size != row.size:
            raise UserError(f"row {i}: tied values cannot be ranked without midranks")
    return np.argsort(np.argsort(raw, axis=1, kind="stable"), axis=1) + 1


def parse_score(spec: str, r: int):
    if spec == "friedman":
        return friedman_score(r)
    if spec.startswith("brownmood:"):
        try:
            a = int(spec.split(":", 1)[1])
        except ValueError:
            raise UserError(f"bad Brown-Mood cut in {spec!r}") from None
        return brown_mood_score(r, a)
    if spec.startswith("custom:"):
        try:
            values = [float(v) for v in spec.split(":", 1)[1].split(",")]
        except ValueError:
            raise UserError(f"bad custom score list in {spec!r}") from None
        if len(values) != r:
            raise UserError(f"custom score has {len(values)} values, data has r = {r}")
        return make_score(values)
    raise UserError(f"unknown score {spec!r}; use friedman, brownmood:<a> or custom:<v1,...,vr>")


def parse_null(spec: str, r: Optional[int]) -> ProbabilityVector:
    if spec == "uniform":
        if r is None:
            raise UserError("--null uniform needs the number of categories (--categories)")
        return ProbabilityVector.uniform(r)
    try:
        p = [float(v) for v in spec.split(",")]
    except ValueError:
        raise UserError(f"bad --null list {spec!r}") from None
    if r is not None and len(p) != r:
        raise UserError(f"--null has {len(p)} entries, data has r = {r}")
    return ProbabilityVector(p)


def parse_grid(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UserError(f"bad --n-grid {text!r}") from None


def parse_seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return seed


# --- output -------------------------------------------------------------


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def dumps(record: dict) -> str:
    return json.dumps(_json_safe(record), indent=2, sort_keys=True) + "\n"


def _flat_csv(record: dict) -> str:
    flat = {k: v for k, v in record.items() if not isinstance(v, (dict, list))}
    keys = list(flat)

    def fmt(v):
        if isinstance(v, float):
            return f"{v:.17g}"
        return "" if v is None else str(v)

    return ",".join(keys) + "\n" + ",".join(fmt(flat[k]) for k in keys) + "\n"


def emit(record: dict, args) -> None:
    for key in ("statistic", "p_value", "rejection_rate"):
        if key in record:
            print(f"{key}: {record[key]:.10g}")
    for key in ("df", "randomized", "seed"):
        if key in record:
            print(f"{key}: {record[key]}")
    if args.output:
        text = dumps(record) if args.format == "json" else _flat_csv(record)
        Path(args.output).write_text(text)


def _report_dict(report) -> Optional[dict]:
    if report is None:
        return None
    return {
        "condition1_holds": report.condition1_holds,
        "condition2_holds": report.condition2_holds,
        "condition3_holds": report.condition3_holds,
        "margins": list(report.margins),
    }


def _require_seed(args, why: str) -> int:
    if args.seed is None:
        raise UserError(f"--seed is required {why}")
    return args.seed


# --- subcommands --------------------------------------------------------


def cmd_test_rank(args) -> int:
    rows = read_rows(args.input)
    _rect(rows)
    data = np.array([_int_row(r, i) if not args.raw_scores else [float(c) for c in r]
                     for i, r in enumerate(rows, 1)])
    ranks = rankings_from_scores(data) if args.raw_scores else data
    rankings = RankingMatrix(ranks)
    score = parse_score(args.score, rankings.r)
    if args.randomize:
        seed = _require_seed(args, "with --randomize")
        theta = sample_sphere(rankings.n, RandomSource(seed))
        res = randomized_rank_statistic(rankings, score, theta)
    else:
        res = classical_rank_statistic(rankings, score)
    record = {
        "statistic": res.statistic,
        "df": res.df,
        "p_value": res.p_value,
        "randomized": res.randomized,
        "seed": args.seed if args.randomize else None,
        "n": rankings.n,
        "config": {
            "subcommand": "test-rank",
            "input": args.input,
            "score": args.score,
            "score_values": score.values.tolist(),
            "raw_scores": args.raw_scores,
            "randomize": args.randomize,
            "seed": args.seed,
        },
    }
    emit(record, args)
    return EXIT_OK


def _read_gof_input(args, r_hint):
    rows = read_rows(args.input)
    if len(rows) == 1 and len(rows[0]) >= 2:
        return "counts", np.array(_int_row(rows[0], 1))
    for i, row in enumerate(rows, 1):
        if len(row) != 1:
            raise UserError(
                f"row {i}: expected one category index per row (outcomes) or a single row of counts"
            )
    return "outcomes", np.array([_int_row(row, i)[0] for i, row in enumerate(rows, 1)])


def cmd_test_gof(args) -> int:
    kind, values = _read_gof_input(args, args.categories)
    r = values.size if kind == "counts" else args.categories
    p = parse_null(args.null, r)
    phi = phi_lambda(args.lam)
    outcomes = None
    if kind == "counts":
        counts = CountVector(values, args.n if args.n is not None else -1)
    else:
        bad = np.flatnonzero((values < 1) | (values > p.r))
        if bad.size:
            raise UserError(f"row {bad[0] + 1}: category {values[bad[0]]} not in 1..{p.r}")
        outcomes = values
        counts = CountVector(np.bincount(values - 1, minlength=p.r), args.n if args.n is not None else -1)
    report = check_sample_size(counts.n, p, phi) if counts.n >= 2 else None
    try:
        if not args.randomize:
            res = classical_phi_statistic(counts, p, phi)
        else:
            rng = RandomSource(_require_seed(args, "with --randomize"))
            if outcomes is None:
                res = randomized_phi_from_counts(counts, p, phi, rng)
            else:
                res = randomized_phi_statistic(outcomes, p, phi, sample_sphere(counts.n, rng))
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("sample-size report: " + json.dumps(_json_safe(_report_dict(report))), file=sys.stderr)
        return EXIT_USER
    if report is not None and not report.all_hold:
        failed = [str(i + 1) for i, ok in enumerate(
            (report.condition1_holds, report.condition2_holds, report.condition3_holds)) if not ok]
        print(f"warning: sample-size condition(s) {', '.join(failed)} not met; "
              "the O(1/n) accuracy guarantee does not apply", file=sys.stderr)
    record = {
        "statistic": res.statistic,
        "df": res.df,
        "p_value": res.p_value,
        "randomized": res.randomized,
        "seed": args.seed if args.randomize else None,
        "n": counts.n,
        "input_kind": kind,
        "outside_convex_range": res.outside_convex_range,
        "sample_size_report": _report_dict(report),
        "config": {
            "subcommand": "test-gof",
            "input": args.input,
            "lambda": args.lam,
            "null": p.entries.tolist(),
            "declared_n": args.n,
            "randomize": args.randomize,
            "seed": args.seed,
        },
    }
    emit(record, args)
    return EXIT_OK


def _statistic_spec(args) -> StatisticSpec:
    kind = args.kind
    if kind.endswith("_rank"):
        r = args.categories
        if args.score == "friedman" or args.score.startswith("brownmood:"):
            if r is None:
                r = 4
            score = parse_score(args.score, r)
        else:
            values = args.score.split(":", 1)[1].split(",") if args.score.startswith("custom:") else []
            score = parse_score(args.score, len(values) if values else (r or 4))
        return StatisticSpec(kind, r=score.r, score=tuple(score.values.tolist()))
    if args.null == "uniform":
        p = parse_null("uniform", args.categories if args.categories is not None else 3)
    else:
        p = parse_null(args.null, args.categories)
    return StatisticSpec(kind, r=p.r, lam=args.lam, p=tuple(p.entries.tolist()))


def cmd_simulate(args) -> int:
    seed = _require_seed(args, "for simulate")
    config = ExperimentConfig(
        statistic=_statistic_spec(args),
        n_grid=parse_grid(args.n_grid),
        replicates=args.replicates,
        theta_mode=THETA_MODES[args.theta_mode],
        seed=seed,
    )
    report = run_experiment(config, workers=args.workers)
    out = Path(args.output)
    out.write_text(report.to_csv())
    out.with_suffix(".json").write_text(report.to_json())
    print("n          dk             se             excluded_frac")
    for pt in report.points:
        flag = "  (noise-limited)" if pt.noise_limited else ""
        print(f"{pt.n:<10d} {pt.dk:<14.10g} {pt.se:<14.10g} {pt.excluded_frac:.10g}{flag}")
    print(f"slope: {report.slope:.10g}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    seed = _require_seed(args, "for calibrate")
    if args.n is None:
        raise UserError("calibrate needs the sample size --n")
    spec = _statistic_spec(args)
    theta_mode = THETA_MODES[args.theta_mode]
    rate = calibration_check(spec, args.n, args.replicates, args.alpha, RandomSource(seed),
                             theta_mode=theta_mode, workers=args.workers)
    record = {
        "rejection_rate": rate,
        "alpha": args.alpha,
        "seed": seed,
        "config": {
            "subcommand": "calibrate",
            "statistic": spec.to_dict(),
            "n": args.n,
            "replicates": args.replicates,
            "alpha": args.alpha,
            "theta_mode": theta_mode,
            "seed": seed,
        },
    }
    emit(record, args)
    return EXIT_OK


# --- argument parser ----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", help="output file")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--seed", type=parse_seed, help="64-bit seed; required for any randomization")
    common.add_argument("--theta-mode", choices=tuple(THETA_MODES), default=None)
    common.add_argument("--lambda", dest="lam", type=float, default=None, help="power-divergence lambda")
    common.add_argument("--score", default="friedman", help="friedman | brownmood:<a> | custom:<v1,...,vr>")
    common.add_argument("--null", default="uniform", help="uniform | p1,...,pr")
    common.add_argument("--categories", type=int, help="number of categories / items r")
    common.add_argument("--workers", type=int, default=1, help="worker processes (does not change results)")

    parser = argparse.ArgumentParser(prog="randstat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("test-rank", parents=[common], help="method-of-n-rankings test on a CSV of rankings")
    p.add_argument("--input", required=True)
    p.add_argument("--randomize", action="store_true")
    p.add_argument("--raw-scores", action="store_true", help="input rows are raw scores, ranked per row")
    p.set_defaults(func=cmd_test_rank)

    p = sub.add_parser("test-gof", parents=[common], help="phi-divergence goodness-of-fit test")
    p.add_argument("--input", required=True)
    p.add_argument("--randomize", action="store_true")
    p.add_argument("--n", type=int, help="declared total count (validated against the data)")
    p.set_defaults(func=cmd_test_gof)

    p = sub.add_parser("simulate", parents=[common], help="Kolmogorov-distance convergence experiment")
    p.add_argument("--kind", default="randomized_rank",
                   choices=("classical_rank", "randomized_rank", "classical_phi", "randomized_phi"))
    p.add_argument("--n-grid", default="64,128,256,512")
    p.add_argument("--replicates", type=int, default=200_000)
    p.set_defaults(func=cmd_simulate, output_default="convergence.csv")

    p = sub.add_parser("calibrate", parents=[common], help="empirical type-I error at level alpha")
    p.add_argument("--kind", default="randomized_rank",
                   choices=("classical_rank", "randomized_rank", "classical_phi", "randomized_phi"))
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.lam is None:
        args.lam = 1.0 if args.subcommand == "test-gof" else 0.0
    if args.theta_mode is None:
        args.theta_mode = "fresh" if args.subcommand == "calibrate" else "fixed"
    if args.subcommand == "simulate" and not args.output:
        args.output = args.output_default
    try:
        return args.func(args)
    except (UserError, ValidationError, ExperimentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
