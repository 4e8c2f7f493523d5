"""Command-line entry point: simulate, sweep, check-bounds, ingest."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, theory
from .config import load_config, read_entries
from .errors import ConfigurationError, FormatError, ParameterDomainError
from .ingest import RatingFormat, dense_submatrix, file_hash, parse_ratings_csv, save_matrix

log = logging.getLogger("collabgreedy")


def _apply_overrides(path, seed: int | None, jobs: int | None):
    cfg = load_config(path)
    if seed is not None:
        cfg = replace(cfg, seeds=[seed])
    if jobs is not None:
        cfg = replace(cfg, jobs=jobs)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(args.config, args.seed, args.jobs)
    out = harness.run_experiment(cfg)
    print(out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(args.config, args.seed, args.jobs)
    grid = harness.load_grid(args.grid)
    best, cells = harness.sweep(cfg, grid)
    out = harness.write_sweep(cells, best, cfg.resolve(cfg.output_dir), cfg.config_hash())
    failed = sum(c.area is None for c in cells)
    print(json.dumps({"cells": len(cells), "failed": failed, "output": str(out),
                      "best": None if best is None else {"theta": best.theta, "alpha": best.alpha,
                                                         "area": best.area}}, indent=2))
    return 0 if best is not None else 1


def _params(path) -> dict:
    if path is None:
        return {}
    return {k: e.value for k, e in read_entries(path).items()}


CHECK_DEFAULTS = {
    "lemma4": {"n": 200, "k": 4, "trials": 100_000, "seed": 0},
    "lemma5": {"t": 100, "alpha": 0.5, "trials": 10_000, "seed": 0},
    "egood": {"n": 100, "m": 2000, "k": 2, "t": 1700, "alpha": 0.1, "trials": 50, "seed": 0},
}


def cmd_check_bounds(args) -> int:
    params = dict(CHECK_DEFAULTS[args.which])
    params.update(_params(args.params))
    if args.seed is not None:
        params["seed"] = args.seed
    fn = {"lemma4": theory.lemma4_check, "lemma5": theory.lemma5_check, "egood": theory.egood_check}
    result = fn[args.which](**params)
    report = json.dumps(result.to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(report + "\n")
    print(report)
    return 0 if result.passed else 1


def cmd_ingest(args) -> int:
    parsed = parse_ratings_csv(args.input, args.format)
    matrix = dense_submatrix(parsed.triples, args.n_top, args.m_top, args.threshold)
    out = save_matrix(matrix, args.out, file_hash(args.input))
    print(json.dumps({"output": str(out), "n": args.n_top, "m": args.m_top,
                      "density": matrix.density, "malformed_lines": parsed.n_malformed,
                      "duplicates": matrix.n_duplicates}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collabgreedy", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run every policy x seed of a config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="run only this seed")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid search theta and alpha for Collaborative-Greedy")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", help="grid file; default theta 0.0..1.0 x alpha 0.1..0.5")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-bounds", help="Monte Carlo check of a tail bound")
    p.add_argument("--which", choices=sorted(CHECK_DEFAULTS), required=True)
    p.add_argument("--params", help="key = value file overriding the defaults")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_check_bounds)

    p = sub.add_parser("ingest", help="build a dense replay matrix from a ratings dump")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=[f.value for f in RatingFormat], default="comma")
    p.add_argument("--n-top", type=int, required=True)
    p.add_argument("--m-top", type=int, required=True)
    p.add_argument("--threshold", type=float, default=4.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ParameterDomainError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
