"""Command line entry point: ``netsel <stage> --config run.toml``."""

from __future__ import annotations

import argparse
import logging
import sys

from .artifacts import StaleArtifact
from .config import ConfigError, load_config

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

COMMANDS = {
    "ingest": "load an event log, split it and build attribute matrices and labels",
    "synth": "generate the planted synthetic dataset described in the config",
    "infer": "build every configured network on each partition",
    "evaluate": "train and score predictors for every model, label and task",
    "select": "rank models and compute selection and stability statistics",
    "significance": "score each model's efficiency against the rest",
    "noise": "rewire target models and re-score them",
    "report": "write the CSV reports from existing artifacts",
    "run": "all of the above in order",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netsel", description="Task-focused network model selection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--workers", type=int, help="parallel workers (never changes results)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--force", action="store_true", help="use stale upstream artifacts anyway")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .pipeline import Runner  # deferred so --help stays fast

    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.workers, args.out)
        if args.command == "ingest" and cfg.data.events is None:
            raise ConfigError("ingest needs [data] events; use 'synth' for a synthetic dataset")
        if args.command == "synth" and cfg.data.synthetic is None:
            raise ConfigError("synth needs a [data.synthetic] table")
        runner = Runner(cfg, force=args.force)
        if args.command in ("ingest", "synth"):
            runner.dataset()
        elif args.command == "run":
            runner.run_all()
        elif args.command == "report":
            runner.report()
        else:
            getattr(runner, args.command)()
    except ConfigError as exc:
        print(f"netsel: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StaleArtifact as exc:
        print(f"netsel: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # surfaced with context, never a traceback dump
        print(f"netsel: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
