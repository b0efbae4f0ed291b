"""Command-line entry point.

    tcdiag <command> [--config FILE] [--seed N] [--chains N] [--out DIR]
                     [--format csv|jsonl] [--workers N] [--print-config]

Commands: moments, threshold, negativity, coherent-info, relative-entropy,
collapse, and verify (with an optional level argument, quick or full).
Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 capacity guard."""

from __future__ import annotations

import argparse
import os
import sys
import time

from .config import COMMANDS, load_config
from .errors import CapacityError, ConfigError, VerificationError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcdiag",
        description="Diagnostics of error-corrupted toric-code memories: "
                    "exact engines, Monte Carlo, and transition analysis.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "verify":
            p.add_argument("level", nargs="?", default=None, choices=("quick", "full"),
                           help="verification depth (default quick)")
        p.add_argument("--config", default=None, help="TOML experiment file")
        p.add_argument("--seed", type=int, default=None, help="64-bit base seed")
        p.add_argument("--chains", type=int, default=None, help="Monte Carlo chain count")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", default=None, choices=("csv", "jsonl"))
        p.add_argument("--workers", type=int, default=None, help="chain worker processes")
        p.add_argument("--print-config", action="store_true",
                       help="echo the fully resolved config and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {"seed": args.seed, "chains": args.chains, "out": args.out,
                     "format": args.format, "workers": args.workers}
        if getattr(args, "level", None):
            overrides["level"] = args.level
        cfg = load_config(args.config, overrides, command=args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.print_config:
        print(cfg.echo_toml())
        return 0

    from . import report, runner

    t0 = time.time()
    try:
        artifacts = runner.run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity guard: {exc}", file=sys.stderr)
        return 3
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1

    out_dir = cfg.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    paths = [report.write_results(artifacts.rows, cfg, out_dir)]
    acc_path = report.write_accumulators(artifacts.accumulators, out_dir)
    if acc_path:
        paths.append(acc_path)
    paths.extend(report.write_reports(artifacts.reports, out_dir))
    if cfg.io.figures:
        paths.extend(report.render_figures(cfg.command, artifacts.figures, out_dir))
    paths.append(report.write_manifest(cfg, out_dir, wall_time_s=time.time() - t0))

    for name, text in artifacts.reports.items():
        print(text)
    print(f"wrote {len(paths)} files to {out_dir}")

    if artifacts.failed_checks:
        print(f"{artifacts.failed_checks} verification checks failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
