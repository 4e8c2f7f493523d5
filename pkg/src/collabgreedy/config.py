"""Experiment configuration files.

Configs are plain text, one ``key = value`` per line. ``[section]`` headers
prefix the keys that follow (``[paf]`` then ``W = 5`` is ``paf.W``), ``#``
starts a comment, and values are JSON literals, comma-separated lists, or
bare strings. A ``.json`` file holding a flat or nested object also works.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .greedy import AlgorithmParams

POLICIES = ("collaborative_greedy", "oracle", "random", "global_popularity", "paf_lite", "logged")


@dataclass
class Entry:
    value: object
    line: int


def _scalar(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        lowered = text.lower()
        if lowered in ("true", "false"):
            return lowered == "true"
        return text


def _value(text: str):
    text = text.strip()
    if text.startswith("["):
        return _scalar(text)
    if "," in text:
        return [_scalar(part) for part in text.split(",") if part.strip()]
    return _scalar(text)


def parse_text(text: str) -> dict[str, Entry]:
    entries: dict[str, Entry] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        if section:
            key = f"{section}.{key}"
        entries[key] = Entry(_value(val), lineno)
    return entries


def _flatten(doc: dict, prefix: str = "") -> dict[str, Entry]:
    out: dict[str, Entry] = {}
    for key, val in doc.items():
        full = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, full + "."))
        else:
            out[full] = Entry(val, 0)
    return out


def read_entries(path) -> dict[str, Entry]:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return _flatten(json.loads(text))
    return parse_text(text)


def _where(entry: Entry | None) -> str:
    return f"line {entry.line}: " if entry is not None and entry.line else ""


@dataclass
class ExperimentConfig:
    env: str = "synthetic"
    k: int = 2
    m: int = 100
    n: int = 100
    delta: float = 0.5
    mu: float = 0.5
    scheme: str = "noiseless"
    balanced: bool = False
    matrix: str | None = None
    policies: list = field(default_factory=lambda: ["collaborative_greedy"])
    theta: float | str = "auto"
    alpha: float = 0.5
    alpha_joint: float | None = None
    exclude_empty_overlap: bool = False
    popularity_epsilon: float = 0.1
    paf_W: int = 10
    paf_epsilon: float = 0.1
    logged_path: str | None = None
    T: int = 100
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "out"
    jobs: int = 1
    base_dir: str = "."

    def resolve(self, relative: str | None) -> Path | None:
        if relative is None:
            return None
        p = Path(relative)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self) -> dict:
        out = asdict(self)
        # where the config lives and how many workers run it do not change results
        out.pop("base_dir")
        out.pop("jobs")
        out.pop("output_dir")
        return out

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def algorithm_params(self, theta: float) -> AlgorithmParams:
        return AlgorithmParams(theta=theta, alpha=self.alpha, alpha_joint=self.alpha_joint,
                               exclude_empty_overlap=self.exclude_empty_overlap)

    @property
    def n_items(self) -> int:
        if self.env == "replay":
            from .ingest import load_matrix

            return load_matrix(self.resolve(self.matrix)).values.shape[1]
        return self.m


# config key -> (attribute, caster)
_KEYS = {
    "env": ("env", str),
    "k": ("k", int),
    "m": ("m", int),
    "n": ("n", int),
    "delta": ("delta", float),
    "mu": ("mu", float),
    "scheme": ("scheme", str),
    "balanced": ("balanced", bool),
    "matrix": ("matrix", str),
    "policies": ("policies", list),
    "policy": ("policies", list),
    "theta": ("theta", None),
    "alpha": ("alpha", float),
    "alpha_joint": ("alpha_joint", float),
    "exclude_empty_overlap": ("exclude_empty_overlap", bool),
    "popularity.epsilon": ("popularity_epsilon", float),
    "paf.W": ("paf_W", int),
    "paf.epsilon": ("paf_epsilon", float),
    "logged.path": ("logged_path", str),
    "T": ("T", int),
    "seeds": ("seeds", list),
    "output_dir": ("output_dir", str),
    "jobs": ("jobs", int),
}


def _cast(key: str, entry: Entry, caster):
    val = entry.value
    try:
        if caster is list:
            return list(val) if isinstance(val, list) else [val]
        if caster is bool:
            if not isinstance(val, bool):
                raise TypeError
            return val
        if caster is int:
            if isinstance(val, bool) or float(val) != int(val):
                raise TypeError
            return int(val)
        if caster is None:
            return val if val == "auto" else float(val)
        return caster(val)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{_where(entry)}bad value {val!r} for {key}") from None


def build_config(entries: dict[str, Entry], base_dir=".") -> ExperimentConfig:
    cfg = ExperimentConfig(base_dir=str(base_dir))
    for key, entry in entries.items():
        if key not in _KEYS:
            raise ConfigurationError(f"{_where(entry)}unknown key {key!r}")
        attr, caster = _KEYS[key]
        setattr(cfg, attr, _cast(key, entry, caster))
    validate(cfg, entries)
    return cfg


def validate(cfg: ExperimentConfig, entries: dict[str, Entry] | None = None) -> None:
    entries = entries or {}

    def fail(key: str, msg: str):
        raise ConfigurationError(f"{_where(entries.get(key))}{msg}")

    if cfg.env not in ("synthetic", "replay"):
        fail("env", f"env must be 'synthetic' or 'replay', got {cfg.env!r}")
    if cfg.env == "replay":
        if not cfg.matrix:
            fail("env", "replay environment needs a 'matrix' path")
        if not cfg.resolve(cfg.matrix).exists():
            fail("matrix", f"matrix {cfg.matrix!r} not found")
        bad = [p for p in cfg.policies if p == "oracle"]
        if bad:
            fail("policies", "the oracle needs ground-truth preferences; use a synthetic environment")
    if cfg.scheme not in ("noiseless", "symmetric", "biased"):
        fail("scheme", f"unknown scheme {cfg.scheme!r}")
    for p in cfg.policies:
        if p not in POLICIES:
            key = "policies" if "policies" in entries else "policy"
            fail(key, f"unknown policy {p!r}; choose from {', '.join(POLICIES)}")
    if "logged" in cfg.policies and not cfg.logged_path:
        fail("policies", "policy 'logged' needs logged.path")
    if not cfg.seeds:
        fail("seeds", "seed list must not be empty")
    if any(not isinstance(s, int) or s < 0 for s in cfg.seeds):
        fail("seeds", "seeds must be non-negative integers")
    if cfg.T < 1:
        fail("T", "T must be at least 1")
    if cfg.jobs < 1:
        fail("jobs", "jobs must be at least 1")
    if cfg.T > cfg.n_items:
        fail("T", f"horizon T={cfg.T} exceeds the number of items m={cfg.n_items}")
    if cfg.theta != "auto":
        if not 0.0 <= cfg.theta <= 1.0:
            fail("theta", f"theta must lie in [0, 1], got {cfg.theta}")
    elif cfg.env == "replay" and "collaborative_greedy" in cfg.policies:
        fail("theta", "theta = auto needs a synthetic environment; give a number")
    try:
        cfg.algorithm_params(0.5)
    except ValueError as exc:
        fail("alpha", str(exc))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return build_config(read_entries(path), base_dir=path.resolve().parent)
