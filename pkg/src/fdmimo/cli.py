"""Command-line runner: ``fdmimo <subcommand> [flags]``.

Exit codes: 0 success, 2 usage, 3 validation, 4 I/O, 5 numerical singularity.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .errors import FdmimoError, SingularityError, ValidationError
from .sweep import (DEFAULT_CONFIG, RECIPES, SweepSpec, recipe, run_sweep, spec_from_mapping,
                    to_csv, to_json)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_IO, EXIT_SINGULAR = 0, 2, 3, 4, 5

SINGLE_POINT = {
    "simulate": ("sum_rate_mc",),
    "analytic": ("sum_rate_analytic",),
    "nmse": ("nmse",),
    "region": ("region_verdict",),
    "compare": ("fd_hd_ratio", "coop_noncoop_ratio"),
}


class _IOFailure(Exception):
    pass


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON system configuration")
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--trials", type=_nonneg, help="Monte Carlo trials (default 2000)")
    common.add_argument("--out", type=Path, help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--scheme", choices=("nSPT", "SPT"), action="append",
                        help="pilot scheme (repeatable)")
    common.add_argument("--scenario", choices=("non-cooperative", "cooperative"), action="append")
    common.add_argument("--filter", choices=("MF", "ZF"), action="append")
    common.add_argument("--link", choices=("DL", "UL"), action="append")
    common.add_argument("--workers", type=int, default=1, help="parallel sweep points")

    parser = argparse.ArgumentParser(prog="fdmimo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name, help_text in (("simulate", "Monte Carlo sum rates"),
                            ("analytic", "closed-form sum rates"),
                            ("nmse", "SI-channel NMSE"),
                            ("region", "FD-vs-HD reliable-region verdicts (needs T)"),
                            ("compare", "FD/HD and cooperative/non-cooperative ratios")):
        sub.add_parser(name, parents=[common], help=help_text)
    sweep = sub.add_parser("sweep", parents=[common], help="parameter sweep or figure recipe")
    src = sweep.add_mutually_exclusive_group(required=True)
    src.add_argument("--sweep", type=Path, dest="sweep_path", help="JSON sweep specification")
    src.add_argument("--recipe", choices=sorted(RECIPES))
    return parser


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise _IOFailure(f"cannot read {path}: {exc}") from exc


def _spec_for(args) -> SweepSpec:
    if args.command == "sweep":
        if args.recipe:
            spec = recipe(args.recipe)
        else:
            try:
                doc = json.loads(_read(args.sweep_path))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"sweep file is not valid JSON: {exc}") from exc
            if not isinstance(doc, dict):
                raise ValidationError("sweep document must be a JSON object")
            spec = spec_from_mapping(doc)
    else:
        spec = SweepSpec(None, outputs=SINGLE_POINT[args.command])
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    for flag, name in (("scheme", "schemes"), ("scenario", "scenarios"),
                       ("filter", "filters"), ("link", "links")):
        if getattr(args, flag):
            changes[name] = tuple(dict.fromkeys(getattr(args, flag)))
    if changes:
        spec = SweepSpec(**{**spec.__dict__, **changes})
    return spec


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        base = load_config(_read(args.config)) if args.config else DEFAULT_CONFIG
        spec = _spec_for(args)
        rows = run_sweep(base, spec, args.seed, max(1, args.workers))
        text = to_csv(rows) if args.format == "csv" else to_json(rows)
        if args.out is None:
            sys.stdout.write(text)
        else:
            try:
                args.out.write_text(text)
            except OSError as exc:
                raise _IOFailure(f"cannot write {args.out}: {exc}") from exc
    except _IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SingularityError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FdmimoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
