"""Command-line interface.

Subcommands: ``estimate`` (one dataset, one row per estimator),
``compare`` (estimate per judge/pair group in a file), ``simulate``
(Monte Carlo grids, binary or mixture), ``split-coverage`` (repeated
resplits of a labeled corpus), and ``identity-check`` (variance-formula
consistency sweep). Reports are CSV by default; ``--figures DIR``
renders PNG figures next to the delimited output.
"""

import argparse
import json
import os
import sys

from . import dataio, figures, identities
from .errors import DataFormatError, EstimationError
from .estimators import BINARY_ESTIMATORS
from .inference import InferenceResult, estimate_all
from .simulate import (
    BinarySimConfig,
    ContinuousSimConfig,
    calibration_rmse_study,
    run_grid,
)

_ESTIMATE_COLUMNS = (
    "estimator", "theta_hat", "se", "ci_lower", "ci_upper", "level",
    "lambda", "q0_hat", "q1_hat", "clamped", "converged", "error",
)


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def _str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip() != ""]


def _result_cells(name: str, res: InferenceResult | EstimationError) -> dict:
    if isinstance(res, EstimationError):
        return {"estimator": name, "error": type(res).__name__}
    diag = res.diagnostics
    return {
        "estimator": name,
        "theta_hat": res.theta_hat,
        "se": res.variance.se,
        "ci_lower": res.ci.lower,
        "ci_upper": res.ci.upper,
        "level": res.ci.level,
        "lambda": diag.get("lambda"),
        "q0_hat": diag.get("q0_hat"),
        "q1_hat": diag.get("q1_hat"),
        "clamped": diag.get("clamped"),
        "converged": diag.get("converged"),
        "error": None,
    }


def _print_estimate_table(rows: list[dict], stream) -> None:
    def fmt(value):
        if value is None:
            return ""
        if isinstance(value, bool):
            return str(value).lower()
        if isinstance(value, float):
            return f"{value:.6f}"
        return str(value)

    table = [[fmt(row.get(c)) for c in _ESTIMATE_COLUMNS] for row in rows]
    widths = [
        max(len(c), *(len(line[i]) for line in table)) if table else len(c)
        for i, c in enumerate(_ESTIMATE_COLUMNS)
    ]
    header = "  ".join(c.ljust(w) for c, w in zip(_ESTIMATE_COLUMNS, widths))
    print(header, file=stream)
    print("-" * len(header), file=stream)
    for line in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(line, widths)), file=stream)


def _write_estimate_csv(rows: list[dict], path: str) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(_ESTIMATE_COLUMNS)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else row.get(c) for c in _ESTIMATE_COLUMNS])


def _emit_estimate(rows, args, header: str) -> None:
    print(header)
    if args.json:
        print(json.dumps(rows, indent=2, default=str))
    else:
        _print_estimate_table(rows, sys.stdout)
    if args.output:
        _write_estimate_csv(rows, args.output)


def cmd_estimate(args) -> int:
    records = dataio.read_records(args.input, format=args.format)
    data = dataio.records_to_dataset(records)
    results = estimate_all(data, tuple(args.estimators), args.level)
    rows = [_result_cells(name, results[name]) for name in args.estimators]
    _emit_estimate(rows, args, f"# judgecal estimate seed=- level={args.level} input={args.input}")
    if args.figures:
        ok = {n: r for n, r in results.items() if isinstance(r, InferenceResult)}
        path = figures.save_estimate_figure([(os.path.basename(args.input), ok)],
                                            os.path.join(args.figures, "estimate_ci.png"))
        print(f"# wrote {path}")
    hard_failures = [r for r in results.values() if isinstance(r, EstimationError)]
    if len(hard_failures) == len(results):
        raise hard_failures[0]
    return 0


def cmd_compare(args) -> int:
    records = dataio.read_records(args.input, format=args.format)
    groups: dict[tuple, list] = {}
    for rec in records:
        groups.setdefault((rec.pair or "-", rec.judge or "-"), []).append(rec)
    print(f"# judgecal compare seed=- level={args.level} input={args.input} groups={len(groups)}")
    panel = []
    all_rows = []
    for (pair, judge), recs in sorted(groups.items()):
        label = f"pair={pair} judge={judge}"
        data = dataio.records_to_dataset(recs)
        results = estimate_all(data, tuple(args.estimators), args.level)
        rows = [_result_cells(name, results[name]) for name in args.estimators]
        for row in rows:
            row.update({"pair": pair, "judge": judge})
        all_rows.extend(rows)
        print(f"## {label} (m={data.m}, n={data.n})")
        if args.json:
            print(json.dumps(rows, indent=2, default=str))
        else:
            _print_estimate_table(rows, sys.stdout)
        panel.append((label, {n: r for n, r in results.items() if isinstance(r, InferenceResult)}))
    if args.output:
        _write_estimate_csv(all_rows, args.output)
    if args.figures:
        path = figures.save_estimate_figure(panel, os.path.join(args.figures, "compare_ci.png"))
        print(f"# wrote {path}")
    return 0


def _binary_configs(args) -> list[BinarySimConfig]:
    thetas = args.grid_theta or [round(0.1 * k, 1) for k in range(1, 10)]
    if args.grid_q0 or args.grid_q1:
        q0s = args.grid_q0 or args.grid_q or [0.6, 0.7, 0.8]
        q1s = args.grid_q1 or args.grid_q or [0.6, 0.7, 0.8]
        pairs = [(q0, q1) for q0 in q0s for q1 in q1s]
    else:
        pairs = [(q, q) for q in (args.grid_q or [0.6, 0.7, 0.8])]
    budgets = args.budget or [0.01, 0.05, 0.10]
    B = args.B if args.B is not None else 1000
    estimators = tuple(args.estimators) if args.estimators else BINARY_ESTIMATORS
    return [
        BinarySimConfig(
            theta=theta, q0=q0, q1=q1, N=args.N, labeled_fraction=budget,
            B=B, level=args.level, seed=args.seed, estimators=estimators,
        )
        for q0, q1 in pairs
        for budget in budgets
        for theta in thetas
    ]


def _mixture_configs(args) -> list[ContinuousSimConfig]:
    mu3s = args.grid_mu3 or [3, 4, 5, 6, 7, 8, 9]
    budgets = args.budget or [0.05, 0.10, 0.20]
    B = args.B if args.B is not None else 500
    families = tuple(args.mu_family) if args.mu_family else ("categorical", "linear", "spline")
    return [
        ContinuousSimConfig(
            mu=(args.mu1, args.mu2, float(mu3)), sigma=args.sigma, N=args.N,
            labeled_fraction=budget, B=B, level=args.level, seed=args.seed,
            mu_families=families,
        )
        for budget in budgets
        for mu3 in mu3s
    ]


def _emit_report(report, args, header: str) -> None:
    print(header)
    if args.output:
        dataio.write_report(report, args.output, format=args.report_format)
        print(f"# wrote {args.output} ({len(report.rows)} rows)")
    else:
        print(dataio.report_to_text(report, args.report_format), end="")
    if args.figures:
        for path in figures.save_report_figures(report, args.figures):
            print(f"# wrote {path}")


def cmd_simulate(args) -> int:
    parallelism = args.parallelism if args.parallelism is not None else (os.cpu_count() or 1)
    if args.rmse_study:
        configs = _binary_configs(args)
        report = calibration_rmse_study(configs, parallelism=parallelism)
        _emit_report(report, args, f"# judgecal simulate --rmse-study seed={args.seed} configs={len(configs)}")
        return 0
    if args.dgp == "binary":
        configs = _binary_configs(args)
    else:
        configs = _mixture_configs(args)
    report = run_grid(configs, parallelism=parallelism)
    failed = sum(row.n_failed for row in report.rows)
    _emit_report(
        report, args,
        f"# judgecal simulate seed={args.seed} dgp={args.dgp} configs={len(configs)} replicate_failures={failed}",
    )
    return 0


def cmd_split_coverage(args) -> int:
    records = dataio.read_records(args.input, format=args.format)
    spec = dataio.SplitSpec(calibration_fraction=args.budget, seed=args.seed)
    report = dataio.split_coverage_experiment(
        records, spec, B=args.B if args.B is not None else 1000,
        estimators=tuple(args.estimators), level=args.level,
    )
    _emit_report(report, args, f"# judgecal split-coverage seed={args.seed} input={args.input}")
    return 0


def cmd_identity_check(args) -> int:
    report = identities.run_identity_check(points=args.points, seed=args.seed)
    print(f"# judgecal identity-check seed={args.seed} points={report.points} elapsed={report.elapsed_seconds:.2f}s")
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status}  {check.name}: max deviation {check.max_deviation:.3e} (tolerance {check.tolerance:.1e})")
    if not report.passed:
        print("identity check FAILED", file=sys.stderr)
        return 1
    print("all identities hold")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="judgecal",
        description="Debiased mean estimates and calibrated intervals from noisy judge labels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, with_estimators=True):
        p.add_argument("--input", required=True, help="records file (CSV or JSONL)")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        if with_estimators:
            p.add_argument("--estimators", type=_str_list, default=list(BINARY_ESTIMATORS),
                           help="comma list from: naive,rg,ppi,ppi++,mle,eif")
        p.add_argument("--level", type=float, default=0.90)
        p.add_argument("--output", help="also write rows to this CSV file")
        p.add_argument("--json", action="store_true", help="print JSON instead of a table")
        p.add_argument("--figures", help="directory for rendered PNG figures")

    p_est = sub.add_parser("estimate", help="estimate one dataset, one row per estimator")
    add_io(p_est)
    p_est.set_defaults(handler=cmd_estimate)

    p_cmp = sub.add_parser("compare", help="estimate per (pair, judge) group in a records file")
    add_io(p_cmp)
    p_cmp.set_defaults(handler=cmd_compare)

    p_sim = sub.add_parser("simulate", help="Monte Carlo coverage/width grid")
    p_sim.add_argument("--dgp", choices=("binary", "mixture"), default="binary")
    p_sim.add_argument("--grid-theta", type=_float_list, help="comma list of true rates")
    p_sim.add_argument("--grid-q", type=_float_list, help="symmetric judge accuracies")
    p_sim.add_argument("--grid-q0", type=_float_list)
    p_sim.add_argument("--grid-q1", type=_float_list)
    p_sim.add_argument("--theta", dest="grid_theta", type=_float_list, help=argparse.SUPPRESS)
    p_sim.add_argument("--q", dest="grid_q", type=_float_list, help=argparse.SUPPRESS)
    p_sim.add_argument("--budget", type=_float_list, help="labeled fractions")
    p_sim.add_argument("--grid-mu3", type=_float_list, help="third mixture mean (mixture dgp)")
    p_sim.add_argument("--mu1", type=float, default=1.0)
    p_sim.add_argument("--mu2", type=float, default=2.0)
    p_sim.add_argument("--sigma", type=float, default=1.0)
    p_sim.add_argument("--mu-family", type=_str_list, help="categorical,linear,spline")
    p_sim.add_argument("--estimators", type=_str_list)
    p_sim.add_argument("--N", type=int, default=2000)
    p_sim.add_argument("--B", type=int)
    p_sim.add_argument("--level", type=float, default=0.90)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--parallelism", type=int, help="worker processes (default: cores)")
    p_sim.add_argument("--rmse-study", action="store_true",
                       help="report RMSE of the plug-in error rates instead of estimator metrics")
    p_sim.add_argument("--output", help="report file (default: print to stdout)")
    p_sim.add_argument("--format", dest="report_format", choices=("csv", "json"), default="csv")
    p_sim.add_argument("--figures", help="directory for rendered PNG figures")
    p_sim.set_defaults(handler=cmd_simulate)

    p_split = sub.add_parser("split-coverage", help="coverage across random resplits of a labeled corpus")
    p_split.add_argument("--input", required=True)
    p_split.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p_split.add_argument("--budget", type=float, default=0.10, help="calibration fraction")
    p_split.add_argument("--B", type=int, default=1000)
    p_split.add_argument("--seed", type=int, default=0)
    p_split.add_argument("--estimators", type=_str_list, default=list(BINARY_ESTIMATORS))
    p_split.add_argument("--level", type=float, default=0.90)
    p_split.add_argument("--output")
    p_split.add_argument("--format-report", dest="report_format", choices=("csv", "json"), default="csv")
    p_split.add_argument("--figures")
    p_split.set_defaults(handler=cmd_split_coverage)

    p_id = sub.add_parser("identity-check", help="verify the variance-formula identities")
    p_id.add_argument("--points", type=int, default=10_000)
    p_id.add_argument("--seed", type=int, default=20_240_817)
    p_id.set_defaults(handler=cmd_identity_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (EstimationError, DataFormatError, FileNotFoundError) as err:
        print(f"error code={type(err).__name__} message={err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
