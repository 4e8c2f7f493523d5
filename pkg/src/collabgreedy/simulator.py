"""Time-stepped environment loop and the reward / likable-count objectives."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError, ParameterDomainError
from .latent_model import Population
from .policy import Policy
from .state import SessionState, new_session, record_step


class SyntheticEnvironment:
    """Ratings drawn from a latent source population.

    Each ``(u, i)`` rating is fixed up front as ``+1`` when a uniform keyed by
    ``(seed, u, i)`` falls below ``p_ui``, else ``-1``. Which pairs a policy
    touches therefore never changes the rating any other pair receives.
    """

    kind = "synthetic"

    def __init__(self, population: Population, seed: int):
        self.population = population
        self.seed = seed
        probs = population.user_probs()
        uniforms = _rng.derive(seed, _rng.RATINGS).random(probs.shape)
        self.matrix = np.where(uniforms < probs, 1, -1).astype(np.int8)
        self.likable = probs > 0.5

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]


class ReplayEnvironment:
    """Ratings looked up in a fixed {-1, 0, +1} matrix; 0 means unobserved."""

    kind = "replay"

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or not np.all(np.isin(matrix, (-1, 0, 1))):
            raise ConfigurationError("replay matrix must be 2-d over {-1, 0, +1}")
        self.matrix = matrix.astype(np.int8)
        self.likable = self.matrix == 1
        self.population = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]


def draw_rating(env, u: int, i: int) -> int:
    return int(env.matrix[u, i])


@dataclass
class MetricsSeries:
    n: int
    sum_reward: list[int] = field(default_factory=list)
    sum_likable: list[int] = field(default_factory=list)
    actions: list[str] = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.sum_reward)

    def cum_reward(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.sum_reward, dtype=np.int64))

    def cum_likable(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.sum_likable, dtype=np.int64))

    def append(self, reward: int, likable: int, action: str) -> None:
        self.sum_reward.append(int(reward))
        self.sum_likable.append(int(likable))
        self.actions.append(action)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "action", "sum_reward", "sum_likable", "cum_reward", "cum_likable"])
        rows = zip(range(1, self.T + 1), self.actions, self.sum_reward, self.sum_likable,
                   self.cum_reward(), self.cum_likable())
        for t, a, r, x, cr, cx in rows:
            writer.writerow([t, a, r, x, int(cr), int(cx)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n: int) -> "MetricsSeries":
        out = cls(n=n)
        for row in csv.DictReader(io.StringIO(text)):
            out.append(int(row["sum_reward"]), int(row["sum_likable"]), row["action"])
        return out


@dataclass
class RunResult:
    metrics: MetricsSeries
    state: SessionState

    def summary(self, policy: str, params: dict | None = None, seeds: dict | None = None) -> dict:
        T = self.metrics.T
        return {
            "policy": policy,
            "params": params or {},
            "seeds": seeds or {},
            "T": T,
            "r_plus_fraction": likable_fraction(self.metrics, 1, T) if T else 0.0,
            "avg_cum_reward": avg_cumulative_reward(self.metrics, T) if T else 0.0,
        }


def run(env, policy: Policy, T: int, seed: int) -> RunResult:
    """Run ``policy`` against ``env`` for ``T`` steps.

    ``seed`` drives the joint-exploration order and every random choice the
    policy makes; the environment's ratings have their own seed.
    """
    if T > env.m:
        raise ConfigurationError(f"horizon T={T} exceeds the number of items m={env.m}")
    if T < 0:
        raise ConfigurationError("horizon must be non-negative")
    state = new_session(env.n, env.m, seed)
    metrics = MetricsSeries(n=env.n)
    users = np.arange(env.n)
    for _ in range(T):
        recs, action = policy.recommend(state, seed)
        ratings = env.matrix[users, recs]
        likable = env.likable[users, recs]
        record_step(state, recs, ratings, was_joint=action.value == "joint_explore")
        metrics.append(int(ratings.sum()), int(likable.sum()), action.value)
    return RunResult(metrics, state)


def likable_fraction(metrics: MetricsSeries, start: int, stop: int) -> float:
    """Share of likable recommendations over steps ``start..stop`` (1-based, inclusive)."""
    if not 1 <= start <= stop <= metrics.T:
        raise ParameterDomainError(f"window [{start}, {stop}] is empty or outside 1..{metrics.T}")
    window = np.asarray(metrics.sum_likable[start - 1 : stop], dtype=float)
    return float(window.sum() / (metrics.n * (stop - start + 1)))


def avg_cumulative_reward(metrics: MetricsSeries, T: int) -> float:
    if not 0 <= T <= metrics.T:
        raise ParameterDomainError(f"T={T} outside the series length {metrics.T}")
    return float(sum(metrics.sum_reward[:T]) / metrics.n)


def summary_json(result: RunResult, policy: str, params: dict, seeds: dict) -> str:
    return json.dumps(result.summary(policy, params, seeds), indent=2, sort_keys=True) + "\n"
