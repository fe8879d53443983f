"""``emotranscap`` command line.

Exit status: 0 success, 1 validation failure, 2 client failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from . import pipeline
from .config import load_config
from .errors import ClientError, EmoTransError, GenerationError, ValidationError
from .metrics import jsonable

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CLIENT = 2
EXIT_USAGE = 64

COMMANDS = ("plan", "build-dataset", "preprocess", "train-mtetr", "annotate", "evaluate", "stats", "dump-config")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommand copies use SUPPRESS so they do not reset flags given before the command
    d = {"default": argparse.SUPPRESS} if suppress else {}
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML config file (must set seed)", **d)
    common.add_argument("--parallelism", type=int, help="utterance worker count", **d)
    common.add_argument("--offline", action="store_true", help="force the built-in fallback clients", **d)
    common.add_argument("--run-dir", help="override paths.run_dir", **d)
    common.add_argument("--seed", type=int, **d)
    common.add_argument("-v", "--verbose", action="count", **(d or {"default": 0}))
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emotranscap", description=__doc__.splitlines()[0], parents=[_common(False)])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "plan": "write the transition-plan inventory",
        "build-dataset": "generate discourses and synthesize audio",
        "preprocess": "VAD and silence removal",
        "train-mtetr": "train the transition recognizer",
        "annotate": "recognize, measure attributes and compose captions",
        "evaluate": "write the metric report",
        "stats": "write the dataset statistics table",
        "dump-config": "print the resolved configuration as YAML",
    }
    common = _common(True)
    for name in COMMANDS:
        sub.add_parser(name, help=helps[name], parents=[common])
    return parser


def _overrides(args) -> dict:
    out: dict = {}
    if args.parallelism is not None:
        out["parallelism"] = args.parallelism
    if args.seed is not None:
        out["seed"] = args.seed
    if args.run_dir:
        out.setdefault("paths", {})["run_dir"] = args.run_dir
    if args.offline:
        out.setdefault("clients", {})["offline"] = True
    return out


def run(command: str, cfg, out=None) -> dict:
    out = out or sys.stdout
    if command == "dump-config":
        out.write(cfg.dump())
        return {}
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    if command == "plan":
        summary = pipeline.run_plan(cfg)
    else:
        clients = pipeline.make_clients(cfg)
        summary = pipeline.STAGES[command](cfg, clients)
    pipeline.write_run_metadata(cfg, command, summary)
    if command == "evaluate":
        out.write((cfg.run_dir / "reports" / "metrics.txt").read_text(encoding="utf-8"))
    elif command == "stats":
        out.write((cfg.run_dir / "stats" / "stats.tsv").read_text(encoding="utf-8"))
    else:
        out.write(json.dumps(jsonable(summary), sort_keys=True) + "\n")
    return summary


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"emotranscap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, overrides=_overrides(args))
        run(args.command, cfg)
    except (ClientError, GenerationError) as exc:
        print(f"emotranscap: client failure: {exc}", file=sys.stderr)
        return EXIT_CLIENT
    except ValidationError as exc:
        print(f"emotranscap: validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EmoTransError as exc:
        print(f"emotranscap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
