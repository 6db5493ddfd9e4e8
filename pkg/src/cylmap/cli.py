"""Command line entry point.

    cylmap run --config FILE
    cylmap example NAME [--resolution N] [--out DIR]
    cylmap list-examples
    cylmap schema [--config]

Log verbosity comes from ``CYLMAP_LOG`` (DEBUG, INFO, WARNING, ...).
Exit codes: 0 success, 1 config error, 2 non-closed holonomy, 3 internal
check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ConfigError, example_config, load_config, load_schema
from .examples import list_examples
from .holonomy import HolonomyNotClosed
from .pipeline import run
from .report import export_polylines, write_report, write_summary

EXIT_OK, EXIT_CONFIG, EXIT_HOLONOMY, EXIT_CHECK = 0, 1, 2, 3

log = logging.getLogger("cylmap")


def _setup_logging():
    level = os.environ.get("CYLMAP_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _execute(cfg) -> int:
    try:
        result = run(cfg)
    except HolonomyNotClosed as e:
        print(f"error: {e} (the loop transports do not generate a discrete subgroup)", file=sys.stderr)
        return EXIT_HOLONOMY
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        write_report(result.report, cfg.report_path)
        export_polylines(result.report, cfg.polylines_path)
        write_summary(result.report, cfg.summary_path)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for name, c in result.report["checks"].items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {c['detail']}")
    print(f"report: {cfg.report_path}")
    return result.exit_code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cylmap", description="Cylinder valued momentum maps and local-to-global checks")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a pipeline from a config file")
    p_run.add_argument("--config", required=True)
    p_ex = sub.add_parser("example", help="run a built-in example")
    p_ex.add_argument("name")
    p_ex.add_argument("--resolution", type=int)
    p_ex.add_argument("--out", default=".")
    sub.add_parser("list-examples", help="list built-in examples")
    p_schema = sub.add_parser("schema", help="print the report JSON schema")
    p_schema.add_argument("--config", action="store_true", help="print the config schema instead")
    args = parser.parse_args(argv)
    _setup_logging()

    if args.command == "list-examples":
        for name, desc in list_examples():
            print(f"{name}\t{desc}")
        return EXIT_OK
    if args.command == "schema":
        print(json.dumps(load_schema("run_config" if args.config else "run_report"), indent=2))
        return EXIT_OK
    try:
        if args.command == "run":
            cfg = load_config(args.config)
        else:
            cfg = example_config(args.name, args.resolution, args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return _execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
