"""Comparison policies: oracle, uniform random, and popularity votes."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError, ContractViolation, ExhaustedError, ParameterDomainError
from .latent_model import Population
from .policy import ActionKind, Policy, argmax_unconsumed, check_available, random_unconsumed, tie_keys
from .state import SessionState


class OraclePolicy(Policy):
    """Knows every user's true preferences and serves likable items first."""

    name = "oracle"

    def __init__(self, population: Population):
        self.likable = population.likable()

    def recommend(self, state, seed):
        keys = tie_keys(seed, state.t, state.n, state.m)
        return argmax_unconsumed(self.likable.astype(float), state.consumed, keys), ActionKind.EXPLOIT


class RandomPolicy(Policy):
    name = "random"

    def recommend(self, state, seed):
        check_available(state)
        return random_unconsumed(state, seed), ActionKind.RANDOM_EXPLORE


def oracle_recommend(state: SessionState, u: int, pop: Population, seed: int = 0) -> int:
    """Single-user form of :class:`OraclePolicy`; same keys, same choice."""
    row = pop.likable()[u : u + 1].astype(float)
    keys = tie_keys(seed, state.t, state.n, state.m)[u : u + 1]
    return int(argmax_unconsumed(row, state.consumed[u : u + 1], keys)[0])


def random_recommend(state: SessionState, u: int, rng: np.random.Generator) -> int:
    free = np.flatnonzero(~state.consumed[u])
    if free.size == 0:
        raise ExhaustedError(f"user {u} has consumed every item")
    return int(rng.choice(free))


def friend_matrix(ratings: np.ndarray, width: int) -> np.ndarray:
    """(n, n) indicator of each user's ``width`` most cosine-similar other users.

    Similarity is the cosine over co-rated items, which for +/-1 ratings is
    ``<r_u, r_v> / |co-rated|`` (0 when nothing is co-rated). Ties go to the
    lower user index.
    """
    n = ratings.shape[0]
    y = ratings.astype(float)
    support = np.abs(y)
    inner = y @ y.T
    overlap = support @ support.T
    sim = np.where(overlap > 0, inner / np.maximum(overlap, 1.0), 0.0)
    np.fill_diagonal(sim, -np.inf)
    width = min(width, n - 1)
    order = np.argsort(-sim, axis=1, kind="stable")[:, :width]
    friends = np.zeros((n, n), dtype=bool)
    friends[np.arange(n)[:, None], order] = True
    return friends


class PopularityPolicy(Policy):
    """Epsilon-greedy popularity vote over all users, or over each user's top friends.

    ``friends=None`` counts +1 ratings across every user (global popularity).
    ``friends=W`` restricts the vote to the ``W`` users most cosine-similar to
    the target user on co-rated items, a simplified stand-in for
    Popularity-Amongst-Friends.
    """

    def __init__(self, epsilon: float = 0.0, friends: int | None = None):
        if not 0.0 <= epsilon <= 1.0:
            raise ParameterDomainError(f"epsilon must lie in [0, 1], got {epsilon}")
        if friends is not None and friends < 1:
            raise ConfigurationError("friend count W must be at least 1")
        self.epsilon = epsilon
        self.friends = friends
        self.name = "global_popularity" if friends is None else "paf_lite"

    def votes(self, state: SessionState) -> np.ndarray:
        plus = (state.ratings == 1).astype(float)
        if self.friends is None:
            return np.broadcast_to(plus.sum(axis=0), (state.n, state.m))
        return friend_matrix(state.ratings, self.friends).astype(float) @ plus

    def recommend(self, state, seed):
        check_available(state)
        keys = tie_keys(seed, state.t, state.n, state.m)
        recs = argmax_unconsumed(self.votes(state), state.consumed, keys)
        if self.epsilon > 0:
            explore = _rng.derive(seed, _rng.ACTION, state.t + 1).random(state.n) < self.epsilon
            recs = np.where(explore, random_unconsumed(state, seed), recs)
        return recs, ActionKind.EXPLOIT


def popularity_recommend(state: SessionState, u: int, epsilon: float = 0.0,
                         friends: int | None = None, seed: int = 0) -> int:
    return int(PopularityPolicy(epsilon, friends).recommend(state, seed)[0][u])


class LoggedPolicy(Policy):
    """Replays an externally produced recommendation log.

    The log is a CSV with header ``t,user,item`` (``t`` starting at 1). Used
    to score policies that run outside this package on the same
    environment.
    """

    name = "logged"

    def __init__(self, path):
        self.path = Path(path)
        self.log: dict[int, dict[int, int]] = {}
        with self.path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                self.log.setdefault(int(row["t"]), {})[int(row["user"])] = int(row["item"])

    def recommend(self, state, seed):
        step = self.log.get(state.t + 1, {})
        missing = [u for u in range(state.n) if u not in step]
        if missing:
            raise ContractViolation(f"log has no entry for user {missing[0]} at t={state.t + 1}")
        return np.array([step[u] for u in range(state.n)], dtype=np.int64), ActionKind.EXPLOIT
