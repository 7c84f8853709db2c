"""``kplab <experiment> --config <path> [--output <dir>] [--seed <n>] [--threads <n>]``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import EXPERIMENTS, ConfigErrors, validate
from .runner import EXIT_CONFIG, run_experiment, write_manifest

ENV_OUTPUT = "KPLAB_OUTPUT"


def build_parser():
    p = argparse.ArgumentParser(prog="kplab", description="KP-II control laboratory batch runner.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--output", help="output directory (beats KPLAB_OUTPUT and the config)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    return p


def _fail(message, out_dir):
    print(message, file=sys.stderr)
    if out_dir:
        try:
            write_manifest(out_dir, {"status": "error", "exit_code": EXIT_CONFIG, "error": message})
        except OSError:
            pass
    return EXIT_CONFIG


def main(argv=None):
    args = build_parser().parse_args(argv)
    out_dir = args.output or os.environ.get(ENV_OUTPUT) or None
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"cannot read configuration {args.config}: {exc}", out_dir)
    if isinstance(raw, dict):
        raw.setdefault("experiment", args.experiment)
        if args.seed is not None:
            raw["seed"] = args.seed
        if not out_dir and isinstance(raw.get("output_dir"), str):
            out_dir = raw["output_dir"]
    if args.threads < 1:
        return _fail("--threads must be >= 1", out_dir)
    try:
        cfg = validate(raw)
    except ConfigErrors as exc:
        return _fail(str(exc), out_dir)
    if cfg.experiment != args.experiment:
        return _fail(f"config describes experiment {cfg.experiment!r}, command line asked for "
                     f"{args.experiment!r}", out_dir)
    out_dir = args.output or os.environ.get(ENV_OUTPUT) or cfg.output_dir
    code, manifest = run_experiment(cfg, threads=args.threads, output_dir=out_dir)
    if manifest.get("error"):
        print(manifest["error"], file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
