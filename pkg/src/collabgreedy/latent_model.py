"""Latent source populations: generation, assumption checks and summaries.

A population has ``k`` preference vectors over ``m`` items and assigns each
of ``n`` users to one of them. User ``u`` likes item ``i`` with probability
``sources[assignment[u], i]``.
"""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError, ParameterDomainError


class Scheme(str, enum.Enum):
    NOISELESS = "noiseless"
    SYMMETRIC = "symmetric"
    BIASED = "biased"


@dataclass(frozen=True)
class ModelSummary:
    mu: float
    gamma_hat: float
    margin_ok: bool


@dataclass
class Population:
    sources: np.ndarray  # (k, m) like-probabilities
    assignment: np.ndarray  # (n,) type index per user
    delta: float
    seed: int = 0
    enforce_margin: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.sources = np.asarray(self.sources, dtype=float)
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.sources.ndim != 2:
            raise ConfigurationError("sources must be a (k, m) array")
        if self.assignment.ndim != 1:
            raise ConfigurationError("assignment must be a 1-d array")
        if np.any((self.sources < 0) | (self.sources > 1)) or not np.all(np.isfinite(self.sources)):
            raise ParameterDomainError("preference probabilities must lie in [0, 1]")
        if self.assignment.size and (self.assignment.min() < 0 or self.assignment.max() >= self.k):
            raise ConfigurationError("type index out of range")
        if self.enforce_margin and not check_no_ambiguous(self, self.delta):
            raise ParameterDomainError(f"population has items within {self.delta} of 1/2")

    @property
    def k(self) -> int:
        return self.sources.shape[0]

    @property
    def m(self) -> int:
        return self.sources.shape[1]

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def user_probs(self) -> np.ndarray:
        """(n, m) matrix of per-user like-probabilities."""
        return self.sources[self.assignment]

    def likable(self) -> np.ndarray:
        """(n, m) boolean matrix, True where ``p_ui > 1/2``."""
        return self.user_probs() > 0.5

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "m": self.m,
            "n": self.n,
            "delta": self.delta,
            "sources": self.sources.tolist(),
            "assignment": self.assignment.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Population":
        pop = cls(np.array(doc["sources"], dtype=float), np.array(doc["assignment"]),
                  float(doc["delta"]), int(doc.get("seed", 0)))
        if (pop.k, pop.m, pop.n) != (doc["k"], doc["m"], doc["n"]):
            raise ConfigurationError("population document sizes disagree with its arrays")
        return pop

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Population":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_population(k: int, m: int, n: int, delta: float = 0.5, mu_target: float = 0.5,
                        scheme: Scheme | str = Scheme.NOISELESS, seed: int = 0,
                        balanced: bool = False) -> Population:
    """Draw a population from one of the three example constructions.

    * ``noiseless``: every entry is an independent fair coin in {0, 1}; the
      margin is 1/2 whatever ``delta`` says.
    * ``symmetric``: entries are ``1/2 + delta`` or ``1/2 - delta`` with equal
      probability.
    * ``biased``: entries are ``1/2 + delta`` with probability ``mu_target``,
      else ``1/2 - delta``.

    Users pick a type uniformly at random, or round-robin when ``balanced``.
    """
    scheme = Scheme(scheme)
    if k < 1 or m < 1 or n < 1:
        raise ConfigurationError("k, m and n must be positive")
    if k > n:
        raise ConfigurationError(f"k={k} types cannot exceed n={n} users")
    if not 0 < delta <= 0.5:
        raise ParameterDomainError(f"delta must lie in (0, 1/2], got {delta}")
    if not 0 < mu_target <= 0.5:
        raise ParameterDomainError(f"mu_target must lie in (0, 1/2], got {mu_target}")

    g = _rng.derive(seed, _rng.POPULATION)
    if scheme is Scheme.NOISELESS:
        sources = (g.random((k, m)) < 0.5).astype(float)
        delta = 0.5
    else:
        like_prob = 0.5 if scheme is Scheme.SYMMETRIC else mu_target
        up = g.random((k, m)) < like_prob
        sources = np.where(up, 0.5 + delta, 0.5 - delta)

    if balanced:
        assignment = np.arange(n) % k
    else:
        assignment = _rng.derive(seed, _rng.ASSIGNMENT).integers(k, size=n)
    return Population(sources, assignment, float(delta), seed, enforce_margin=True)


def check_no_ambiguous(pop: Population, delta: float) -> bool:
    """True iff every source entry is at least ``delta`` away from 1/2."""
    if delta <= 0:
        raise ParameterDomainError("delta must be positive")
    # rounding slack so that 0.5 + 0.3 - 0.5 passes a margin of 0.3
    return bool(np.all(np.abs(pop.sources - 0.5) >= delta - 1e-12))


def compute_gamma_hat(pop: Population) -> float:
    """Smallest gamma for which the incoherence assumption holds.

    Max over pairs of distinct sources of ``<2p_u - 1, 2p_v - 1> / (4 m delta^2)``.
    Zero for a single-source population. May be negative.
    """
    if pop.delta <= 0:
        raise ParameterDomainError("gamma_hat is undefined for delta = 0")
    if pop.k < 2:
        return 0.0
    centered = 2.0 * pop.sources - 1.0
    gram = centered @ centered.T / pop.m
    best = max(gram[a, b] for a, b in itertools.combinations(range(pop.k), 2))
    return float(best / (4.0 * pop.delta ** 2))


def compute_mu(pop: Population) -> float:
    """Minimum over represented types of the fraction of likable items."""
    represented = np.unique(pop.assignment)
    if represented.size == 0:
        represented = np.arange(pop.k)
    frac = (pop.sources[represented] > 0.5).mean(axis=1)
    return float(frac.min())


def summarize(pop: Population) -> ModelSummary:
    return ModelSummary(mu=compute_mu(pop), gamma_hat=compute_gamma_hat(pop),
                        margin_ok=check_no_ambiguous(pop, pop.delta))


def default_theta(pop: Population) -> float:
    """Neighbourhood threshold ``2 delta^2 (1 + gamma_hat)`` clipped to [0, 1]."""
    theta = 2.0 * pop.delta ** 2 * (1.0 + compute_gamma_hat(pop))
    return float(min(max(theta, 0.0), 1.0))
