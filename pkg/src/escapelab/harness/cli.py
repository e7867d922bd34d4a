"""Command-line entry point: every experiment is a seeded, re-runnable
command writing a RunRecord JSON and a per-row CSV.

Exit codes: 0 success, 2 validation error, 3 numerical-signal error,
1 internal error, 64 unknown subcommand.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

from ..errors import (
    ConfigurationError,
    DomainError,
    ExtrapolationError,
    GroupDataError,
    InsufficientSignalError,
    PrecisionError,
    ResolutionError,
    SchemaError,
)
from .config import ExperimentConfig
from .experiments import EXPERIMENTS
from .records import RunRecord, load_record, make_run_id, persist_record, utc_stamp

USAGE = (
    "usage: escapelab SUBCOMMAND --config PATH [--seed U64] [--out DIR]\n"
    "                 [--threads N] [--format {csv,json,both}]\n"
    f"subcommands: {', '.join(sorted(EXPERIMENTS))}, report\n"
)

VALIDATION_ERRORS = (ConfigurationError, GroupDataError, DomainError, SchemaError)
SIGNAL_ERRORS = (
    InsufficientSignalError,
    PrecisionError,
    ResolutionError,
    ExtrapolationError,
)


def build_parser(command):
    parser = argparse.ArgumentParser(prog=f"escapelab {command}")
    parser.add_argument("--config", required=command != "report", help="config file path")
    parser.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
    parser.add_argument("--out", default="runs", help="output directory")
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("ESCAPELAB_THREADS", "1")),
        help="worker threads (results are thread-count independent)",
    )
    parser.add_argument("--format", choices=("csv", "json", "both"), default=None)
    return parser


def run_report(args):
    outdir = args.out
    if not os.path.isdir(outdir):
        print(f"no run directory {outdir!r}")
        return 2
    names = sorted(n for n in os.listdir(outdir) if n.endswith(".json"))
    if not names:
        print(f"no run records in {outdir!r}")
        return 0
    for name in names:
        rec = load_record(os.path.join(outdir, name))
        summary = ", ".join(f"{k}={v}" for k, v in sorted(rec.summary.items()))
        flag = f" [{len(rec.warnings)} warnings]" if rec.warnings else ""
        print(f"{rec.run_id}: {summary}{flag}")
    return 0


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE)
        return 0 if argv else 64
    command = argv[0]
    if command == "report":
        args = build_parser(command).parse_args(argv[1:])
        return run_report(args)
    if command not in EXPERIMENTS:
        sys.stderr.write(f"unknown subcommand {command!r}\n{USAGE}")
        return 64
    args = build_parser(command).parse_args(argv[1:])
    try:
        cfg = ExperimentConfig.from_file(args.config)
        started = utc_stamp()
        rows, warnings, summary = EXPERIMENTS[command](cfg, args.seed, args.threads)
        record = RunRecord(
            run_id=make_run_id(command, cfg.config_hash(), args.seed),
            command=command,
            config_hash=cfg.config_hash(),
            seed=args.seed,
            started=started,
            finished=utc_stamp(),
            rows=rows,
            warnings=warnings,
            summary=summary,
            config_text=cfg.canonical_text(),
        )
        fmt = args.format or cfg.get("output", "formats", "both")
        outdir = args.out if args.out != "runs" else cfg.get("output", "directory", "runs")
        paths = persist_record(record, outdir, fmt)
        for path in paths:
            print(path)
        for warning in warnings:
            print(f"warning: {warning}", file=sys.stderr)
        return 0
    except VALIDATION_ERRORS as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return 2
    except SIGNAL_ERRORS as exc:
        sys.stderr.write(f"numerical-signal error: {exc}\n")
        return 3
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
