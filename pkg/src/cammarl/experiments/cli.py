"""Command-line entry point: run, compare, validate.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from cammarl.experiments.config import ConfigError, load_config
from cammarl.experiments.metrics import compare_modes
from cammarl.experiments.runner import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cammarl",
        description="Train and compare multi-agent runs with conformal action modeling.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a seed sweep from a config file")
    run_p.add_argument("--config", required=True, help="path to a JSON config")
    run_p.add_argument("--seeds", help="comma-separated seed override, e.g. 1,2,3")
    run_p.add_argument("--mode", help="modeling mode override")
    run_p.add_argument("--env", help="environment name override (default parameters)")
    run_p.add_argument("--out", help="output directory override")

    cmp_p = sub.add_parser("compare", help="rank finished runs by final returns")
    cmp_p.add_argument("--runs", required=True, help="comma-separated run directories")

    val_p = sub.add_parser("validate", help="check a config file and echo it")
    val_p.add_argument("--config", required=True, help="path to a JSON config")
    return parser


def _apply_overrides(config, args):
    from cammarl.experiments.config import parse_config

    blob = config.to_json_dict()
    if args.seeds:
        try:
            blob["seeds"] = [int(s) for s in args.seeds.split(",") if s]
        except ValueError as exc:
            raise ConfigError(f"seeds: {exc}") from exc
    if args.mode:
        blob["mode"] = args.mode
    if args.env:
        blob["env"] = args.env
    if args.out:
        blob["out_dir"] = args.out
    return parse_config(blob)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            config = load_config(args.config)
            print(json.dumps(config.to_json_dict(), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "run":
            config = _apply_overrides(load_config(args.config), args)
            try:
                run_dir = run_experiment(config)
            except Exception as exc:
                print(f"runtime failure: {exc}", file=sys.stderr)
                return EXIT_RUNTIME
            summary = json.loads((run_dir / "summary.json").read_text())
            print(f"run directory: {run_dir}")
            print(f"completed seeds: {summary['completed_seeds']}")
            if summary["failed_seeds"]:
                print(f"failed seeds: {summary['failed_seeds']}", file=sys.stderr)
                return EXIT_RUNTIME
            return EXIT_OK
        if args.command == "compare":
            dirs = [d for d in args.runs.split(",") if d]
            if not dirs:
                raise ConfigError("runs: no run directories given")
            try:
                report = compare_modes(dirs)
            except (FileNotFoundError, ValueError) as exc:
                raise ConfigError(f"runs: {exc}") from exc
            print(report.format_table())
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - unexpected
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
