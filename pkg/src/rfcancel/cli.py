"""Command-line experiment runner.

Subcommands map one-to-one onto the runner operations; every experiment is
described by a YAML scenario file.  Exit codes: 0 success, 1 config error,
2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import yaml

from . import runner
from .config import from_tree, validate_tree
from .errors import ConfigError, RfCancelError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfcancel",
        description="Reference-aided RF interference cancellation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "execute one scenario and write its artifacts"),
        ("sweep-isr", "EVM vs interference-to-SOI ratio sweep"),
        ("sweep-freq", "cancellation depth vs RF carrier sweep"),
        ("sweep-format", "EVM per modulation format at fixed ISR"),
        ("compare-bss", "reference-aided vs blind separation on one scenario"),
        ("validate-config", "schema-check a scenario file"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out", default=None, help="artifact directory "
                       "(defaults to the config's outputs.directory)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--format", default="csv", choices=["csv"],
                       help="artifact format")
    return parser


def _load(args) -> tuple:
    with open(args.config, "r") as fh:
        tree = yaml.safe_load(fh)
    bad = validate_tree(tree if isinstance(tree, dict) else {})
    if bad:
        raise ConfigError(bad)
    cfg = from_tree(tree)
    if args.seed is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
    out_dir = args.out or cfg.outputs.directory
    return cfg, out_dir


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            with open(args.config, "r") as fh:
                tree = yaml.safe_load(fh)
            bad = validate_tree(tree if isinstance(tree, dict) else {})
            if bad:
                for item in bad:
                    print(f"invalid: {item}", file=sys.stderr)
                return 1
            print(f"{args.config}: ok")
            return 0

        cfg, out_dir = _load(args)
        if args.command == "run":
            report = runner.run(cfg, out_dir)
            print(report.to_json())
        elif args.command == "sweep-isr":
            rows = runner.sweep_isr(cfg, cfg.sweep.isr_db, out_dir)
            _print_rows(rows)
        elif args.command == "sweep-freq":
            rows = runner.sweep_frequency(cfg, cfg.sweep.carriers_hz, out_dir)
            _print_rows(rows)
        elif args.command == "sweep-format":
            rows = runner.sweep_format(cfg, cfg.sweep.formats, out_dir)
            _print_rows(rows)
        elif args.command == "compare-bss":
            rows = runner.compare_separators(cfg, out_dir)
            _print_rows(rows)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        for item in exc.fields:
            print(f"invalid: {item}", file=sys.stderr)
        return 1
    except (RfCancelError, yaml.YAMLError) as exc:
        origin = _originating_module(exc)
        where = f" [{origin}]" if origin else ""
        print(f"error: {type(exc).__name__}{where}: {exc}", file=sys.stderr)
        return 2
    return 0


def _originating_module(exc: BaseException) -> str:
    """Deepest package module in the traceback, for error attribution."""
    module = ""
    tb = exc.__traceback__
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("rfcancel."):
            module = name
        tb = tb.tb_next
    return module


def _print_rows(rows: list[dict]) -> None:
    if not rows:
        print("(empty sweep)")
        return
    header = list(rows[0].keys())
    print(",".join(header))
    for row in rows:
        print(",".join(str(row[h]) for h in header))


if __name__ == "__main__":
    sys.exit(main())
