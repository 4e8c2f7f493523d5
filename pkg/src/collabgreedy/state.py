"""Mutable session state of an online recommendation run."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError, ContractViolation, ExhaustedError


@dataclass
class SessionState:
    """Revealed ratings, consumption record and the shared joint-exploration order.

    ``ratings[u, i]`` is 0 until user ``u`` rates item ``i``. ``consumed`` is
    tracked separately because a replayed missing entry consumes the item
    without revealing a rating.
    """

    n: int
    m: int
    sigma: np.ndarray
    ratings: np.ndarray
    consumed: np.ndarray
    t: int = 0
    joint_count: int = 0

    @property
    def joint_items(self) -> np.ndarray:
        return self.sigma[: self.joint_count]

    def joint_mask(self) -> np.ndarray:
        mask = np.zeros(self.m, dtype=bool)
        mask[self.joint_items] = True
        return mask

    def revealed_joint_matrix(self) -> np.ndarray:
        """(n, m) ratings restricted to jointly explored items."""
        return self.ratings * self.joint_mask()

    def to_dict(self) -> dict:
        us, items = np.nonzero(self.ratings)
        return {
            "n": self.n,
            "m": self.m,
            "t": self.t,
            "joint_count": self.joint_count,
            "sigma": self.sigma.tolist(),
            "ratings": [[int(u), int(i), int(self.ratings[u, i])] for u, i in zip(us, items)],
            "consumed": [np.flatnonzero(row).tolist() for row in self.consumed],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionState":
        n, m = int(doc["n"]), int(doc["m"])
        state = new_session(n, m, seed=0)
        state.sigma = np.asarray(doc["sigma"], dtype=np.int64)
        if sorted(state.sigma.tolist()) != list(range(m)):
            raise ConfigurationError("sigma is not a permutation of the items")
        for u, i, r in doc["ratings"]:
            state.ratings[u, i] = r
        for u, items in enumerate(doc["consumed"]):
            state.consumed[u, items] = True
        state.t = int(doc["t"])
        state.joint_count = int(doc["joint_count"])
        if np.any((state.ratings != 0) & ~state.consumed):
            raise ConfigurationError("snapshot has ratings for unconsumed items")
        return state

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SessionState":
        return cls.from_dict(json.loads(text))


def new_session(n: int, m: int, seed: int) -> SessionState:
    if n < 1 or m < 1:
        raise ConfigurationError(f"need at least one user and one item, got n={n}, m={m}")
    sigma = _rng.derive(seed, _rng.SIGMA).permutation(m)
    return SessionState(
        n=n,
        m=m,
        sigma=sigma,
        ratings=np.zeros((n, m), dtype=np.int8),
        consumed=np.zeros((n, m), dtype=bool),
    )


def record_step(state: SessionState, recommendations, ratings, was_joint: bool) -> SessionState:
    """Apply one time step: every user consumes and rates their recommended item.

    A rating of 0 (replay of a missing entry) marks the item consumed
    without storing a rating. Mutates ``state`` and returns it.
    """
    recs = np.asarray(recommendations, dtype=np.int64)
    vals = np.asarray(ratings, dtype=np.int8)
    if recs.shape != (state.n,) or vals.shape != (state.n,):
        raise ContractViolation("need exactly one recommendation and rating per user")
    if np.any((recs < 0) | (recs >= state.m)):
        raise ContractViolation("recommended item out of range")
    if not np.all(np.isin(vals, (-1, 0, 1))):
        raise ContractViolation("ratings must be -1, 0 or +1")
    users = np.arange(state.n)
    repeat = state.consumed[users, recs]
    if np.any(repeat):
        u = int(np.flatnonzero(repeat)[0])
        raise ContractViolation(f"item {int(recs[u])} was already consumed by user {u}")
    state.consumed[users, recs] = True
    state.ratings[users, recs] = vals
    state.t += 1
    if was_joint:
        state.joint_count += 1
    return state


def jointly_explored_items(state: SessionState) -> set[int]:
    return set(state.joint_items.tolist())


def revealed_joint_vector(state: SessionState, u: int) -> np.ndarray:
    return state.ratings[u] * state.joint_mask()


def next_joint_items(state: SessionState) -> np.ndarray:
    """For every user, the sigma-earliest item they have not consumed."""
    unconsumed_in_order = ~state.consumed[:, state.sigma]
    if not np.all(unconsumed_in_order.any(axis=1)):
        u = int(np.flatnonzero(~unconsumed_in_order.any(axis=1))[0])
        raise ExhaustedError(f"user {u} has consumed every item")
    return state.sigma[np.argmax(unconsumed_in_order, axis=1)]


def next_joint_item(state: SessionState, u: int) -> int:
    for item in state.sigma:
        if not state.consumed[u, item]:
            return int(item)
    raise ExhaustedError(f"user {u} has consumed every item")
