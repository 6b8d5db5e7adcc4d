"""Command-line interface.

Subcommands: predict, sample, connectivity, sweep, concentration, report.
Exit codes: 0 success, 1 usage error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from rgglab import theory
from rgglab.density import NumericFailure
from rgglab.harness import (
    ConfigError,
    ExperimentConfig,
    parse_density,
    run,
    run_trial,
    write_results,
)
from rgglab.partition import InsufficientResolution, build_partition, check_concentration
from rgglab.sampler import export_csv, sample


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to sys.exit(2); we map usage -> 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rgglab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def density_args(p):
        p.add_argument("--density", required=True, help="gaussian | heavy:ALPHA | light:V[:SCALE]")
        p.add_argument("--d", type=int, default=2, help="ambient dimension (default 2)")
        p.add_argument("--n", type=float, required=True, help="process intensity")

    p = sub.add_parser("predict", help="analytic thresholds and prediction for one tuple")
    density_args(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--c-lo", type=float, default=theory.DEFAULT_C_LO)
    p.add_argument("--c-hi", type=float, default=theory.DEFAULT_C_HI)
    p.add_argument("--k-exp", type=float, default=theory.DEFAULT_K_EXP)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("sample", help="draw one point cloud and write it as CSV")
    density_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("connectivity", help="one trial's record as JSON")
    density_args(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--probes", default="", help="comma-separated probe radii")

    p = sub.add_parser("sweep", help="run a sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--json", dest="json_out", default=None, help="optional JSON mirror path")
    p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("concentration", help="per-cube concentration check on one trial")
    density_args(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("report", help="render a results CSV to a gnuplot script")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    return parser


def _print_report_table(report) -> None:
    rows = [
        ("regime", report.regime),
        ("prediction", report.prediction),
        ("n", f"{report.n:g}"),
        ("r", f"{report.r:g}"),
        ("r0", f"{report.r0:.6g}"),
        ("r1", f"{report.r1:.6g}"),
        ("tau", "-" if report.tau is None else f"{report.tau:.6g}"),
        ("w_n", "-" if report.w_n is None else f"{report.w_n:.6g}"),
        ("a_n", "-" if report.a_n is None else f"{report.a_n:.6g}"),
        ("b_n", "-" if report.b_n is None else f"{report.b_n:.6g}"),
        ("expected_isolated", f"{report.expected_isolated:.6g}"),
        ("tail_empty_prob", f"{report.tail_empty_prob:.6g}"),
        ("flags", ",".join(report.flags) or "-"),
    ]
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key:<{width}}  {value}")


def _cmd_predict(args) -> int:
    spec = parse_density(args.density, args.d)
    report = theory.classify(
        spec, args.n, args.r, args.gamma, c_lo=args.c_lo, c_hi=args.c_hi, k_exp=args.k_exp
    )
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        _print_report_table(report)
    return 0


def _cmd_sample(args) -> int:
    spec = parse_density(args.density, args.d)
    cloud = sample(spec, args.n, args.seed)
    export_csv(cloud, args.out)
    print(f"wrote {cloud.count} points to {args.out}")
    return 0


def _cmd_connectivity(args) -> int:
    spec = parse_density(args.density, args.d)
    probes = tuple(float(p) for p in args.probes.split(",") if p.strip())
    if spec.is_light:
        r0, _ = theory.light_tail_radii(spec, args.n)
    else:
        r0, _ = theory.heavy_tail_radii(spec, args.n)
    record = run_trial(spec, args.n, args.r, args.seed, probes=(r0,) + probes)
    print(json.dumps(record.to_json(), indent=2))
    return 0


def _cmd_sweep(args) -> int:
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    config = ExperimentConfig.from_json(data)
    result = run(config, threads=args.threads)
    write_results(result, args.out, args.json_out)
    print(f"wrote {len(result.cells)} cells x {config.trials} trials to {args.out}")
    return 0


def _cmd_concentration(args) -> int:
    spec = parse_density(args.density, args.d)
    conc = theory.concentration_radii(spec, args.n, args.r, args.gamma)
    if not (math.isfinite(conc.r0) and conc.r0 > 0):
        raise NumericFailure(f"concentration radius undefined (A_n = {conc.a_n:g})")
    partition = build_partition(spec.dimension, conc.r0, args.gamma * args.r, seed=args.seed)
    cloud = sample(spec, args.n, args.seed)
    report = check_concentration(partition, cloud, spec, args.gamma)
    print(json.dumps(report.to_json(), indent=2))
    return 0


def _cmd_report(args) -> int:
    path = Path(args.csv)
    if not path.exists():
        raise UsageError(f"results CSV not found: {path}")
    lines = path.read_text().strip().splitlines()
    if not lines or not lines[0].startswith("density,"):
        raise UsageError("input does not look like a results CSV")
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    by_density: dict[str, list[dict]] = {}
    for row in rows:
        by_density.setdefault(row["density"], []).append(row)

    out = [
        "# gnuplot script generated by rgglab report",
        "set datafile separator ','",
        "set logscale x",
        "set xlabel 'n'",
        "set ylabel 'empirical probability'",
        "set yrange [-0.05:1.05]",
        "set key outside",
    ]
    for label, group in sorted(by_density.items()):
        block = f"$data_{len(out)}"
        out.append(f"{block} << EOD")
        for row in sorted(group, key=lambda r: float(r["n"])):
            out.append(
                f"{row['n']},{row['p_disconnected']},{row['ci_lo']},{row['ci_hi']},{row['p_tail_empty']}"
            )
        out.append("EOD")
        out.append(
            f"plot {block} using 1:2:3:4 with yerrorlines title '{label} P(disconnected)', \\"
        )
        out.append(f"     {block} using 1:5 with linespoints title '{label} P(tail empty)'")
        out.append("pause -1")
    Path(args.out).write_text("\n".join(out) + "\n")
    print(f"wrote gnuplot script to {args.out}")
    return 0


_COMMANDS = {
    "predict": _cmd_predict,
    "sample": _cmd_sample,
    "connectivity": _cmd_connectivity,
    "sweep": _cmd_sweep,
    "concentration": _cmd_concentration,
    "report": _cmd_report,
}


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error at {exc.pointer}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, InsufficientResolution) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
