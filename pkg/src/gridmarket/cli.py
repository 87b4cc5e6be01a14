"""Command line entry point: ``simulate`` and ``sweep``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .report import run_sweep, simulate
from .scenarios import DESK_SCALE, ConfigError, parse_config, preset

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridmarket", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and write its reports")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="one-cat ... six-cat")
    src.add_argument("--config", help="path to a key = value config file")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--steps", type=int)
    sim.add_argument("--out", required=True)
    scale = sim.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", type=int, default=DESK_SCALE, help="divide preset pool sizes by k")
    scale.add_argument("--paper-scale", action="store_true", help="full published pool sizes")

    sw = sub.add_parser("sweep", help="run several presets over several seeds")
    sw.add_argument("--presets", required=True, help='e.g. "1..6" or "one-cat,three-cat"')
    sw.add_argument("--seeds", type=int, required=True, help="number of seeds, 0..k-1")
    sw.add_argument("--steps", type=int, default=150)
    sw.add_argument("--out", required=True)
    sw.add_argument("--desk-scale", type=int, default=DESK_SCALE)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            if args.preset:
                cfg = preset(args.preset, 1 if args.paper_scale else args.desk_scale)
            else:
                cfg = parse_config(args.config)
            overrides = {}
            if args.seed is not None:
                overrides["seed"] = args.seed
            if args.steps is not None:
                overrides["total_steps"] = args.steps
            cfg = dataclasses.replace(cfg, **overrides).validate()
        else:
            if args.seeds < 1 or args.steps < 0 or args.desk_scale < 1:
                raise ConfigError("--seeds and --desk-scale must be >= 1, --steps >= 0")
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

    try:
        if args.command == "simulate":
            _, summary, art = simulate(cfg, args.out)
            print(f"{cfg.name}: {summary.steps} steps, mean |xi| {summary.residual_mean:.3f}; wrote {art.out_dir}")
        else:
            try:
                rows = run_sweep(args.presets, args.seeds, args.out, args.desk_scale, args.steps)
            except ValueError as e:
                print(f"error: {e}", file=sys.stderr)
                return EXIT_INVALID
            for r in rows:
                print(f"{r['preset']}: {r['mean_queries']:.1f} queries, {r['mean_millis']:.2f} ms per step")
    except Exception as e:
        logging.getLogger(__name__).debug("run failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
