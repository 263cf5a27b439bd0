"""Command-line interface.

Verbs:
    gradlab run <config.json>          run one experiment and its checks
    gradlab example1 [--epsilon E]     reproduce the 3-d counterexample scenario
    gradlab compare <cfg.json> ...     run several configs on a shared problem
    gradlab spectralize <matrix-file>  eigendecompose a dense matrix file

Exit codes: 0 success, 1 config or domain error, 2 a check failed,
3 file I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .errors import ConfigError, DomainError, GradLabError, StructuralError
from .spectral_core import spectralize


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradlab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")

    p_ex = sub.add_parser("example1", help="run the 3-d counterexample scenario")
    p_ex.add_argument("--epsilon", type=float, default=1.0)
    p_ex.add_argument("--max-iter", type=int, default=8)
    p_ex.add_argument("--csv", default=None, help="write the trajectory CSV here")
    p_ex.add_argument("--json", dest="json_path", default=None, help="write the JSON report here")

    p_cmp = sub.add_parser("compare", help="run several configs sharing a problem")
    p_cmp.add_argument("configs", nargs="+", help="paths to JSON experiment configs")
    p_cmp.add_argument("--csv", default=None, help="write the summary CSV here")

    p_spec = sub.add_parser("spectralize", help="eigendecompose a dense matrix file")
    p_spec.add_argument("matrix_file", help="first line n, then n whitespace-separated rows")
    return parser


def _print_report_summary(report: bench.RunReport) -> None:
    traj = report.trajectory
    print(f"label:       {report.label or '-'}")
    print(f"problem:     n={report.problem.n} kappa={report.problem.kappa:g}")
    print(f"rule:        {report.result.rule.name}")
    print(
        f"run:         {traj.num_steps} steps, stop={report.result.stop_reason}, "
        f"final |g|={traj.gradients[-1].norm():.3e}, final fgap={traj.fgaps[-1]:.3e}"
    )
    if report.rate is not None:
        print(f"rate:        {report.rate.empirical_rate:.6f} over [{report.rate.k0}, {report.rate.K}]")
    for check in report.checks:
        status = {True: "pass", False: "FAIL", None: "info"}[check.passes]
        extra = ""
        if check.kind == "envelope":
            if "error" in check.detail:
                extra = f" {check.detail['variant']}: {check.detail['error']}"
            else:
                extra = f" theta={check.detail['theta']:.6g} min_slack={check.detail['audit']['min_slack']:.3e}"
        elif check.kind in ("property_a", "property_ga"):
            extra = f" witnesses={check.detail['num_witnesses']} at k={check.detail['witness_ks']}"
        elif check.kind == "property_b":
            extra = f" M1={check.detail['M1']:g} m={check.detail['m']}"
        elif check.kind == "rate":
            extra = f" empirical={check.detail['empirical_rate']:.6f}"
        print(f"check:       [{status}] {check.kind}{extra}")
    for warning in report.warnings:
        print(f"warning:     {warning}")


def _cmd_run(args) -> int:
    config = bench.ExperimentConfig.from_file(args.config)
    report = bench.run_experiment(config)
    _print_report_summary(report)
    return 2 if report.has_failures else 0


def _cmd_example1(args) -> int:
    report = bench.example1_scenario(
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        csv_path=args.csv,
        json_path=args.json_path,
    )
    alphas = report.trajectory.stepsizes
    print("alpha sequence:")
    for k, a in enumerate(alphas):
        print(f"  alpha_{k} = {a:.6f}   (1/alpha = {1.0 / a:.6f})")
    _print_report_summary(report)
    return 2 if report.has_failures else 0


def _cmd_compare(args) -> int:
    configs = [bench.ExperimentConfig.from_file(path) for path in args.configs]
    table = bench.compare_rules(configs)
    print(table.to_text(), end="")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(table.to_csv_text())
    failed = any(rep.has_failures for rep in table.reports)
    return 2 if failed else 0


def _cmd_spectralize(args) -> int:
    dense = bench.read_matrix_file(args.matrix_file)
    result = spectralize(dense)
    payload = {
        "n": result.problem.n,
        "eigenvalues": [float(x) for x in result.problem.eigenvalues],
        "kappa": result.problem.kappa,
        "duplicate_eigenvalues": result.problem.has_duplicate_eigenvalues,
    }
    print(json.dumps(payload, indent=2))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "example1": _cmd_example1,
        "compare": _cmd_compare,
        "spectralize": _cmd_spectralize,
    }
    try:
        return handlers[args.verb](args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, DomainError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except GradLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
