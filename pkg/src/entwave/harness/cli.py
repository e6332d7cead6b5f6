"""Command line entry point: ``entwave <experiment> [options]``."""

from __future__ import annotations

import argparse
import sys

from ..errors import ValidationError
from .config import EXPERIMENTS, PRESETS, build_config, load_config
from .outputs import emit_outputs
from .runner import run_experiment


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entwave", description="Run entanglement-wave experiments.")
    p.add_argument("name", nargs="?", metavar="experiment",
                   help=f"one of: {', '.join(EXPERIMENTS)}")
    p.add_argument("--experiment", dest="experiment_flag", help="same as the positional name")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--preset", help=f"one of: {', '.join(PRESETS)}")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        file_cfg = load_config(args.config) if args.config else None
        experiment = args.experiment_flag or args.name
        cfg = build_config(file_cfg, args.preset, experiment=experiment, seed=args.seed,
                           replicas=args.replicas, workers=args.workers, output_dir=args.out)
    except ValidationError as exc:
        print(f"entwave: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"entwave: cannot read configuration: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    try:
        files = emit_outputs(report, cfg["output_dir"])
    except OSError as exc:
        print(f"entwave: cannot write outputs: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(files)} files to {cfg['output_dir']} in {report.wall_time:.1f} s",
          file=sys.stderr)
    for err in report.errors:
        print(f"entwave: {err['experiment']} failed: {err['type']}: {err['message']}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
