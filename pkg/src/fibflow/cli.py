"""Command-line interface.

Subcommands:

* ``run <config.json>``      -- execute an experiment grid
* ``gen-data <spec.json>``   -- write a synthetic train/test pair as CSV
* ``spectral <coeffs...>``   -- spectral report for a companion matrix
* ``bounds <trace> <config>``-- recompute a bound report from artifacts
* ``ode <params.json>``      -- continuous-limit convergence study
* ``report <run-dir>``       -- render figures for a finished run
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, odelimit
from .spectral import CompanionMatrix, SpectralReport, power_envelope


def _cmd_run(args: argparse.Namespace) -> int:
    config = harness.ExperimentConfig.from_json_file(args.config)
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, data=replace(config.data, seed=args.seed))
    summary = harness.run_experiment(config, out_dir=args.out_dir, threads=args.threads)
    for cell in summary.cells:
        status = f"FAILED: {cell.error}" if cell.error else "ok"
        print(f"{cell.method} rep {cell.replication}: {status}")
    print(f"summary: {summary.summary_csv}")
    return 0 if summary.ok else 1


def _cmd_gen_data(args: argparse.Namespace) -> int:
    spec = harness.DataSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    train, test = harness.generate_data(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train.csv").write_text(harness.dataset_to_csv(train), encoding="utf-8")
    (out / "test.csv").write_text(harness.dataset_to_csv(test), encoding="utf-8")
    (out / "meta.json").write_text(json.dumps(spec.to_dict(), indent=2), encoding="utf-8")
    print(f"wrote {train.n} train and {test.n} test rows to {out}")
    return 0


def _cmd_spectral(args: argparse.Namespace) -> int:
    cm = CompanionMatrix(tuple(args.coefficients))
    report = SpectralReport.from_companion(cm).to_dict()
    if args.envelope:
        report["power_envelope"] = power_envelope(cm, args.envelope).tolist()
    print(json.dumps(report, indent=2))
    return 0


def _cmd_bounds(args: argparse.Namespace) -> int:
    report = harness.bound_report_from_artifacts(args.trace, args.config, delta=args.delta)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _cmd_ode(args: argparse.Namespace) -> int:
    params = odelimit.OdeParams.from_dict(
        json.loads(Path(args.params).read_text(encoding="utf-8"))
    )
    dts = [float(v) for v in args.dts.split(",")]
    study = odelimit.limit_study(
        params, dts, scaling=args.scaling, reference=args.reference
    )
    csv_text = study.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(csv_text)
    print(
        f"scaling={study.scaling} reference={study.reference} "
        f"fitted_order={study.fitted_order:.6g}"
    )
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    from .reporting import render_run_report

    paths = render_run_report(args.run_dir, fmt=args.format)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fibflow", description="recursive ensemble learning flows"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--out-dir", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the data seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads for grid cells")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("spec", help="data spec JSON")
    p.add_argument("--out-dir", default="data-out")
    p.add_argument("--seed", type=int, default=None, help="override the data seed")
    p.set_defaults(fn=_cmd_gen_data)

    p = sub.add_parser("spectral", help="spectral report for recursion coefficients")
    p.add_argument("coefficients", nargs="+", type=float, help="companion top row")
    p.add_argument("--envelope", type=int, default=0, help="also emit ||A^k|| up to K")
    p.set_defaults(fn=_cmd_spectral)

    p = sub.add_parser("bounds", help="recompute a bound report from saved artifacts")
    p.add_argument("trace", help="trace CSV path")
    p.add_argument("config", help="cell config JSON path")
    p.add_argument("--delta", type=float, default=0.05)
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("ode", help="continuous-limit convergence study")
    p.add_argument("params", help="ODE params JSON")
    p.add_argument(
        "--dts",
        default="0.015625,0.0078125,0.00390625,0.001953125,0.0009765625",
        help="comma-separated decreasing step sizes",
    )
    p.add_argument("--scaling", choices=odelimit.SCALINGS, default="as-stated")
    p.add_argument("--reference", choices=odelimit.REFERENCES, default=None)
    p.add_argument("--out", default=None, help="write the (dt, error) CSV here")
    p.set_defaults(fn=_cmd_ode)

    p = sub.add_parser("report", help="render figures for a finished run")
    p.add_argument("run_dir", help="experiment output directory")
    p.add_argument("--format", default="png", help="figure file format")
    p.set_defaults(fn=_cmd_report)

    return parser


def main(argv: "list[str] | None" = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (harness.ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
