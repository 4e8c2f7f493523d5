"""Policy interface and the selection helpers shared by all policies."""
from __future__ import annotations

import enum

import numpy as np

from . import rng as _rng
from .errors import ExhaustedError
from .state import SessionState


class ActionKind(str, enum.Enum):
    RANDOM_EXPLORE = "random_explore"
    JOINT_EXPLORE = "joint_explore"
    EXPLOIT = "exploit"


class Policy:
    """Produces one unconsumed item per user per time step.

    ``recommend`` must be a pure function of ``(state, seed)``; all
    randomness comes from streams derived from ``seed`` and ``state.t``.
    """

    name = "policy"

    def recommend(self, state: SessionState, seed: int) -> tuple[np.ndarray, ActionKind]:
        raise NotImplementedError


def tie_keys(seed: int, t: int, n: int, m: int) -> np.ndarray:
    """Uniform keys for breaking ties at step ``t``; row ``u`` belongs to user ``u``."""
    return _rng.derive(seed, _rng.TIE_BREAK, t).random((n, m))


def check_available(state: SessionState) -> None:
    full = state.consumed.all(axis=1)
    if full.any():
        raise ExhaustedError(f"user {int(np.flatnonzero(full)[0])} has consumed every item")


def argmax_unconsumed(values: np.ndarray, consumed: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Row-wise argmax of ``values`` over unconsumed items, ties broken by ``keys``.

    Ties are exact comparisons, so with i.i.d. uniform keys the choice is
    uniform over each row's argmax set.
    """
    values = np.where(consumed, -np.inf, values.astype(float))
    best = values.max(axis=1, keepdims=True)
    if np.any(np.isneginf(best)):
        u = int(np.flatnonzero(np.isneginf(best[:, 0]))[0])
        raise ExhaustedError(f"user {u} has consumed every item")
    candidates = (values == best) & ~consumed
    return np.argmax(np.where(candidates, keys, -1.0), axis=1)


def random_unconsumed(state: SessionState, seed: int) -> np.ndarray:
    """One uniformly random unconsumed item per user."""
    keys = _rng.derive(seed, _rng.EXPLORE, state.t).random((state.n, state.m))
    return argmax_unconsumed(np.zeros((state.n, state.m)), state.consumed, keys)
