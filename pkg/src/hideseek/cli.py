"""Command-line entry point: ``hideseek-sim <kind> [--config FILE] [...]``.

Exit codes: 0 on success, 1 when a verify or enumerate run finds a violated
bound, 2 on a configuration or IO error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, HideSeekError
from .experiments import KINDS, resolve_config, run_experiment
from .harness import write_report


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int, help="64-bit seed")
    common.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    common.add_argument("--out", type=Path, help="CSV output path (JSON sidecar written next to it)")
    common.add_argument("--threads", type=int, help="worker threads for independent trials")
    parser = argparse.ArgumentParser(prog="hideseek-sim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run a {kind} experiment")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        user = json.loads(args.config.read_text()) if args.config else None
        cfg = resolve_config(args.kind, user, seed=args.seed, trials=args.trials, threads=args.threads)
        report = run_experiment(cfg)
        out = args.out or Path(f"{args.kind}.csv")
        csv_path, _ = write_report(report, out)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HideSeekError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status = "ok" if report.passed else "FAILED"
    print(f"{args.kind}: {len(report.rows)} rows -> {csv_path} ({status}, {report.wall_clock:.2f}s)")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
