"""Command-line entry point: ``genco <command> [flags]``.

Log verbosity comes from the GENCO_LOG_LEVEL environment variable
(DEBUG, INFO, WARNING, ...; default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments
from .config import REGIMES, RunConfig, load_config
from .io import dump_grids, read_grids

log = logging.getLogger("genco")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "regime", None):
        cfg = replace(cfg, regime=args.regime)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "n", None) is not None:
        cfg = replace(cfg, n_eval=args.n)
    if getattr(args, "k", None) is not None:
        cfg = replace(cfg, k=args.k)
    return cfg


def cmd_synth(args, kind: str) -> int:
    default = (5, 5) if kind == "levels" else (6, 6)
    dims = (args.height or default[0], args.width or default[1])
    n = args.n or (50 if kind == "levels" else 200)
    manifest = experiments.make_dataset(kind, n, dims, args.seed or 0, args.out)
    print(manifest)
    return 0


def cmd_train(args) -> int:
    report = experiments.run(_config(args), args.out)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_generate(args) -> int:
    samples = experiments.generate(args.run, args.n or 1000, args.seed, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    report = experiments.evaluate_files(args.samples, args.reference, args.k or 5)
    text = json.dumps(report.as_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_sweep(args) -> int:
    cfg = replace(_config(args), regime="penalized-gan")
    rows = experiments.sweep_gamma(cfg, args.out)
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return 0


def cmd_dump(args) -> int:
    grids, _ = read_grids(args.samples)
    dump_grids(grids, args.out)
    print(f"rendered {len(grids)} grids to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genco", description="Generative models trained through exact solvers.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, kind in (("synth-levels", "levels"), ("synth-terrain", "terrain")):
        p = sub.add_parser(name, help=f"synthesize a {kind} corpus with its manifest")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--n", type=int, help="number of grids")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--height", type=int)
        p.add_argument("--width", type=int)
        p.set_defaults(func=lambda a, kind=kind: cmd_synth(a, kind))

    p = sub.add_parser("train", help="train one regime and evaluate it")
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--regime", choices=REGIMES)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="evaluation sample count")
    p.add_argument("--k", type=int, help="nearest-neighbour k for density/coverage")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample from a trained run")
    p.add_argument("--run", required=True, help="run directory written by train")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="samples grid file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="density, coverage and uniqueness of a samples file")
    p.add_argument("--samples", required=True)
    p.add_argument("--reference", required=True, help="dataset grid file or manifest")
    p.add_argument("--k", type=int)
    p.add_argument("--out", help="write the report here as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-gamma", help="penalized runs over the gamma ladder")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dump", help="character-art render of a grid file")
    p.add_argument("--samples", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("GENCO_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # every module error becomes a diagnostic and a nonzero exit
        log.debug("command failed", exc_info=True)
        print(f"genco {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
