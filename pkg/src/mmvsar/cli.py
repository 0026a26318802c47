"""Command line entry point: ``mmvsar run`` and ``mmvsar validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config
from .experiments import run_experiment, write_output

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmvsar",
                                description="Configured MMV SAR imaging experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--threads", type=int, default=1)
    val = sub.add_parser("validate", help="check a config file against the schema")
    val.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    if args.command == "validate":
        print(json.dumps({"valid": True, "kind": cfg.kind, "config_hash": cfg.hash}))
        return EXIT_OK
    if args.seed is not None and args.seed < 0:
        return _error("config", "--seed must be non-negative", EXIT_CONFIG)
    cfg = cfg.with_seed(args.seed)
    try:
        out = run_experiment(cfg, threads=args.threads)
    except (ValueError, IndexError) as exc:
        return _error("config", f"{type(exc).__name__}: {exc}", EXIT_CONFIG)
    try:
        files = write_output(out, cfg, args.out)
    except OSError as exc:
        return _error("output", f"cannot write to {args.out}: {exc.strerror or exc}", EXIT_CONFIG)
    print(json.dumps({"kind": out.kind, "config_hash": cfg.hash, "seed": cfg.seed,
                      "files": [str(f) for f in files],
                      "nonconverged_required": out.nonconverged_required}))
    if out.nonconverged_required:
        return _error("nonconvergence",
                      f"{out.nonconverged_required} required solve(s) did not converge",
                      EXIT_NONCONVERGED)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
