"""Batch experiments: policy x seed grids, aggregation and parameter sweeps."""
from __future__ import annotations

import csv
import io
import json
import logging
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import LoggedPolicy, OraclePolicy, PopularityPolicy, RandomPolicy
from .config import ExperimentConfig
from .errors import ConfigurationError
from .greedy import CollaborativeGreedy
from .ingest import load_matrix
from .latent_model import default_theta, generate_population
from .simulator import MetricsSeries, ReplayEnvironment, SyntheticEnvironment, run

log = logging.getLogger(__name__)

AGGREGATE_COLUMNS = [
    "policy", "t", "n_seeds",
    "mean_sum_reward", "mean_sum_likable",
    "mean_cum_reward", "std_cum_reward",
    "mean_cum_likable", "std_cum_likable",
    "mean_avg_cum_reward", "std_avg_cum_reward",
]


def build_environment(cfg: ExperimentConfig, seed: int):
    if cfg.env == "replay":
        return ReplayEnvironment(load_matrix(cfg.resolve(cfg.matrix)).values)
    pop = generate_population(cfg.k, cfg.m, cfg.n, cfg.delta, cfg.mu, cfg.scheme, seed, cfg.balanced)
    return SyntheticEnvironment(pop, seed)


def build_policy(name: str, cfg: ExperimentConfig, env):
    if name == "collaborative_greedy":
        theta = default_theta(env.population) if cfg.theta == "auto" else float(cfg.theta)
        return CollaborativeGreedy(cfg.algorithm_params(theta))
    if name == "oracle":
        if env.population is None:
            raise ConfigurationError("the oracle needs a synthetic environment")
        return OraclePolicy(env.population)
    if name == "random":
        return RandomPolicy()
    if name == "global_popularity":
        return PopularityPolicy(cfg.popularity_epsilon)
    if name == "paf_lite":
        return PopularityPolicy(cfg.paf_epsilon, friends=cfg.paf_W)
    if name == "logged":
        return LoggedPolicy(cfg.resolve(cfg.logged_path))
    raise ConfigurationError(f"unknown policy {name!r}")


def run_job(cfg: ExperimentConfig, policy_name: str, seed: int) -> MetricsSeries:
    """One (policy, seed) run. Environment and policy share the seed (common random numbers)."""
    env = build_environment(cfg, seed)
    policy = build_policy(policy_name, cfg, env)
    return run(env, policy, cfg.T, seed).metrics


def _job(args) -> MetricsSeries:
    return run_job(*args)


def map_jobs(jobs: list[tuple], workers: int) -> list:
    """Evaluate ``_job`` over ``jobs`` in input order, optionally in worker processes."""
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def _fmt(x: float) -> str:
    return repr(float(x))


def aggregate(series_by_policy: dict[str, list[MetricsSeries]]) -> str:
    """Per-step mean and sample standard deviation across seeds, as CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for policy, runs in series_by_policy.items():
        reward = np.array([r.sum_reward for r in runs], dtype=float)
        likable = np.array([r.sum_likable for r in runs], dtype=float)
        cum_r = np.cumsum(reward, axis=1)
        cum_x = np.cumsum(likable, axis=1)
        avg = cum_r / runs[0].n
        ddof = 1 if len(runs) > 1 else 0
        for t in range(reward.shape[1]):
            writer.writerow([
                policy, t + 1, len(runs),
                _fmt(reward[:, t].mean()), _fmt(likable[:, t].mean()),
                _fmt(cum_r[:, t].mean()), _fmt(cum_r[:, t].std(ddof=ddof)),
                _fmt(cum_x[:, t].mean()), _fmt(cum_x[:, t].std(ddof=ddof)),
                _fmt(avg[:, t].mean()), _fmt(avg[:, t].std(ddof=ddof)),
            ])
    return buf.getvalue()


def run_file_stem(policy: str, seed: int) -> str:
    return f"{policy}__seed{seed}"


def run_experiment(cfg: ExperimentConfig, jobs: int | None = None) -> Path:
    """Run every (policy, seed) pair and write per-run CSV/JSON, ``aggregate.csv`` and ``manifest.json``.

    Files are written to a scratch directory and moved into ``output_dir`` only
    after every run succeeded, so a failed experiment leaves nothing behind.
    """
    workers = cfg.jobs if jobs is None else jobs
    out = cfg.resolve(cfg.output_dir)
    chash = cfg.config_hash()
    pairs = [(p, s) for p in cfg.policies for s in cfg.seeds]
    results = map_jobs([(cfg, p, s) for p, s in pairs], workers)

    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        runs_dir = scratch / "runs"
        runs_dir.mkdir()
        by_policy: dict[str, list[MetricsSeries]] = {}
        files = []
        for (policy, seed), metrics in zip(pairs, results):
            stem = run_file_stem(policy, seed)
            (runs_dir / f"{stem}.csv").write_text(metrics.to_csv())
            summary = {
                "policy": policy,
                "seed": seed,
                "n": metrics.n,
                "T": metrics.T,
                "config_hash": chash,
                "r_plus_fraction": sum(metrics.sum_likable) / (metrics.n * metrics.T),
                "avg_cum_reward": sum(metrics.sum_reward) / metrics.n,
            }
            (runs_dir / f"{stem}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
            files.append(f"runs/{stem}.csv")
            by_policy.setdefault(policy, []).append(metrics)
        (scratch / "aggregate.csv").write_text(aggregate(by_policy))
        manifest = {"config_hash": chash, "config": cfg.to_dict(), "runs": files,
                    "aggregate": "aggregate.csv"}
        (scratch / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        if out.exists():
            shutil.rmtree(out)
        scratch.rename(out)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    log.info("wrote %d runs to %s", len(pairs), out)
    return out


def aggregate_directory(out_dir, config_hash: str | None = None) -> str:
    """Recompute ``aggregate.csv`` from the per-run files of ``out_dir``.

    Refuses to mix runs whose summaries carry different config hashes.
    """
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    expected = config_hash or manifest["config_hash"]
    by_policy: dict[str, list[MetricsSeries]] = {}
    for rel in manifest["runs"]:
        csv_path = out / rel
        summary = json.loads(csv_path.with_suffix(".json").read_text())
        if summary["config_hash"] != expected:
            raise ConfigurationError(f"{csv_path} was produced by config {summary['config_hash']}, "
                                     f"not {expected}")
        series = MetricsSeries.from_csv(csv_path.read_text(), summary["n"])
        by_policy.setdefault(summary["policy"], []).append(series)
    return aggregate(by_policy)


# ---------------------------------------------------------------- sweeps

def _grid_values(val) -> list[float]:
    if isinstance(val, str) and ":" in val:
        start, stop, step = (float(x) for x in val.split(":"))
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    vals = val if isinstance(val, list) else [val]
    return [float(v) for v in vals]


DEFAULT_GRID = {"theta": _grid_values("0.0:1.0:0.1"), "alpha": _grid_values("0.1:0.5:0.1")}


def load_grid(path=None) -> dict[str, list[float]]:
    if path is None:
        return {k: list(v) for k, v in DEFAULT_GRID.items()}
    from .config import read_entries

    entries = read_entries(path)
    grid = {k: list(v) for k, v in DEFAULT_GRID.items()}
    for key, entry in entries.items():
        if key not in grid:
            raise ConfigurationError(f"line {entry.line}: grid key must be theta or alpha, got {key!r}")
        grid[key] = _grid_values(entry.value)
        if not grid[key]:
            raise ConfigurationError(f"line {entry.line}: empty grid for {key}")
    return grid


@dataclass
class SweepCell:
    theta: float
    alpha: float
    area: float | None
    error: str | None = None


def curve_area(mean_avg_cum_reward: np.ndarray) -> float:
    """Trapezoidal area under the curve sampled at t = 1..T with unit spacing."""
    y = np.asarray(mean_avg_cum_reward, dtype=float)
    if y.size < 2:
        return float(y.sum())
    return float(((y[1:] + y[:-1]) / 2).sum())


def _cell_job(args):
    cfg, theta, alpha = args
    try:
        cell_cfg = replace(cfg, theta=theta, alpha=alpha, policies=["collaborative_greedy"])
        curves = []
        for seed in cfg.seeds:
            metrics = run_job(cell_cfg, "collaborative_greedy", seed)
            curves.append(metrics.cum_reward() / metrics.n)
        return SweepCell(theta, alpha, curve_area(np.mean(curves, axis=0)))
    except Exception as exc:  # a failing cell is recorded and the sweep continues
        return SweepCell(theta, alpha, None, f"{type(exc).__name__}: {exc}")


def sweep(cfg: ExperimentConfig, grid: dict[str, list[float]], jobs: int | None = None):
    """Evaluate Collaborative-Greedy on every (theta, alpha) cell.

    Cells are ranked by area under the seed-averaged cumulative reward curve;
    equal areas go to the smaller theta, then the smaller alpha. Returns
    ``(best_cell, all_cells)``; ``best_cell`` is None if every cell failed.
    """
    if not grid.get("theta") or not grid.get("alpha"):
        raise ConfigurationError("sweep grid must list at least one theta and one alpha")
    workers = cfg.jobs if jobs is None else jobs
    args = [(cfg, th, a) for th in grid["theta"] for a in grid["alpha"]]
    if workers <= 1:
        cells = [_cell_job(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_cell_job, args))
    ok = [c for c in cells if c.area is not None]
    best = min(ok, key=lambda c: (-c.area, c.theta, c.alpha)) if ok else None
    return best, cells


def write_sweep(cells: list[SweepCell], best: SweepCell | None, out_dir, config_hash: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["theta", "alpha", "area", "error"])
    for c in cells:
        writer.writerow([_fmt(c.theta), _fmt(c.alpha), "" if c.area is None else _fmt(c.area), c.error or ""])
    (out / "sweep.csv").write_text(buf.getvalue())
    doc = {"config_hash": config_hash,
           "best": None if best is None else {"theta": best.theta, "alpha": best.alpha, "area": best.area}}
    (out / "sweep_best.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out
