"""Command line front end: ``kg-reduce run|sweep|emit``.

Exit codes: 0 all checks passed, 1 a check (or the pipeline) failed,
2 the configuration is invalid.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .exceptions import ConfigInvalid, KGReduceError, UnknownMetric
from .experiment import OUTPUT_ENV, PLOT_METRICS, ExperimentConfig, emit_plotdata, run


def _summary(rec: dict) -> str:
    lines = [f"mode={rec['mode']} hash={rec['config_hash'][:12]}"]
    for name, ok in sorted(rec["checks"].items()):
        lines.append(f"  {'PASS' if ok else 'FAIL'}  {name}")
    for err in rec.get("errors", []):
        lines.append(f"  error in {err['stage']}: {err['type']}: {err['message']}")
    return "\n".join(lines)


def _cmd_run(args, force_mode=None) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
        if force_mode is not None and cfg.mode != force_mode:
            cfg = dataclasses.replace(cfg, mode=force_mode)
        if args.output:
            cfg = dataclasses.replace(cfg, output=args.output)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        rec = run(cfg)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(_summary(rec))
    print(f"record written to {cfg.output_dir() / 'record.json'}")
    return 0 if rec["passed"] else 1


def _cmd_emit(args) -> int:
    try:
        rec = json.loads(Path(args.record).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read record: {exc}", file=sys.stderr)
        return 2
    out = args.out or str(Path(args.record).with_name(f"{args.metric}.csv"))
    try:
        path = emit_plotdata(rec, args.metric, out)
    except UnknownMetric:
        print(f"unknown metric {args.metric!r}; available: {', '.join(PLOT_METRICS)}", file=sys.stderr)
        return 1
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kg-reduce", description=__doc__.splitlines()[0],
                                epilog=f"Relative output directories are placed under ${OUTPUT_ENV} when it is set.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the pipeline named by the config's mode")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="override the output directory")
    s = sub.add_parser("sweep", help="run the config's [sweep] table")
    s.add_argument("config")
    s.add_argument("-o", "--output", help="override the output directory")
    e = sub.add_parser("emit", help="write plot data for one metric of a run record")
    e.add_argument("record")
    e.add_argument("metric", help=", ".join(PLOT_METRICS))
    e.add_argument("-o", "--out", help="CSV path (default: next to the record)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_run(args, force_mode="sweep")
        return _cmd_emit(args)
    except KGReduceError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
