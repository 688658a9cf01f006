"""Command-line entry point: ``run``, ``slope`` and ``presets list``."""

from __future__ import annotations

import argparse
import json
import sys
import typing as t
from pathlib import Path

from lsfield.exceptions import LSFieldConfigError, LSFieldError
from lsfield.expcli.config import OUTPUT_ENV, PRESET_ALIASES, preset_names
from lsfield.expcli.report import slope_report
from lsfield.expcli.runner import run, write_csv
from lsfield.schemas import ErrorRecordSchema

if t.TYPE_CHECKING:
    from collections.abc import Sequence
    from types import TracebackType


def _origin(tb: TracebackType | None) -> str:
    """Module of the innermost traceback frame."""
    module = "lsfield"
    while tb is not None:
        module = tb.tb_frame.f_globals.get("__name__", module)
        tb = tb.tb_next
    return module


def error_record(exc: LSFieldError) -> dict[str, t.Any]:
    """Machine-readable record of a library error."""
    data: dict[str, t.Any] = ErrorRecordSchema().dump(
        {
            "error": type(exc).__name__,
            "message": str(exc),
            "module": _origin(exc.__traceback__),
            "details": exc.details,
        }
    )
    return data


def parse_window(text: str) -> tuple[float, float]:
    """Parse ``lo:hi``."""
    try:
        lo, hi = (float(part) for part in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from exc
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsfield", description="Lancaster-Sarmanov random field experiments.")
    commands = parser.add_subparsers(dest="command", required=True)

    run_cmd = commands.add_parser("run", help="Run an experiment config.")
    source = run_cmd.add_mutually_exclusive_group(required=True)
    source.add_argument("config", nargs="?", help="Path to a JSON config.")
    source.add_argument("--preset", help="Name of a shipped preset.")
    run_cmd.add_argument("--output", help=f"Output root; overrides ${OUTPUT_ENV} and the config.")

    slope_cmd = commands.add_parser("slope", help="Slope report of a curve CSV.")
    slope_cmd.add_argument("curve", help="Curve CSV with d and mi columns.")
    slope_cmd.add_argument("--window", type=parse_window, default=None, help="Fit window lo:hi.")
    slope_cmd.add_argument("--tolerance", type=float, default=0.05, help="Relative tolerance of the order checks.")
    slope_cmd.add_argument("--output", help="Directory for the summary CSV; printed only when omitted.")

    presets_cmd = commands.add_parser("presets", help="Shipped presets.")
    presets_cmd.add_argument("action", choices=("list",))
    return parser


def _run(args: argparse.Namespace) -> int:
    manifest = run(args.preset or args.config, preset=bool(args.preset), output=args.output)
    print(json.dumps({"name": manifest.name, "artifacts": len(manifest.artifacts), "warnings": len(manifest.warnings)}))
    return 0


def _slope(args: argparse.Namespace) -> int:
    report = slope_report(args.curve, args.window, args.tolerance)
    sys.stdout.write(report.text)
    if args.output:
        write_csv(report.table, Path(args.output) / f"{Path(args.curve).stem}-slope.csv")
    return 0


def _presets(args: argparse.Namespace) -> int:
    for name in preset_names():
        print(name)
    for alias, name in PRESET_ALIASES.items():
        print(f"{alias} -> {name}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI.

    Args:
        argv (Sequence[str], optional): Arguments; defaults to ``sys.argv[1:]``.
    Returns:
        The exit status: 0 on success, 2 for configuration errors, 1 for other library errors.
    """
    args = build_parser().parse_args(argv)
    handlers = {"run": _run, "slope": _slope, "presets": _presets}
    try:
        return handlers[args.command](args)
    except LSFieldError as exc:
        sys.stderr.write(json.dumps(error_record(exc), default=str) + "\n")
        return 2 if isinstance(exc, LSFieldConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
