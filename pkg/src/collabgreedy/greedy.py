"""Collaborative-Greedy: two exploration types plus neighbourhood plurality voting.

At every step one action is drawn for the whole population. Random
exploration gives each user a uniformly random unconsumed item, joint
exploration gives each user the next unconsumed item of the shared order
``sigma``, and exploitation recommends the unconsumed item with the highest
score among the user's neighbours.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .errors import ExhaustedError, ParameterDomainError
from .policy import ActionKind, Policy, argmax_unconsumed, check_available, random_unconsumed, tie_keys
from .state import SessionState, next_joint_items

MAX_ALPHA = 4.0 / 7.0
# absorbs rounding in theta * overlap; inner products and overlaps are integers
_THRESHOLD_EPS = 1e-9


@dataclass(frozen=True)
class AlgorithmParams:
    theta: float
    alpha: float
    # decay for joint exploration when it should differ from alpha (no theory backing)
    alpha_joint: float | None = None
    exclude_empty_overlap: bool = False

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ParameterDomainError(f"theta must lie in [0, 1], got {self.theta}")
        for name in ("alpha", "alpha_joint"):
            a = getattr(self, name)
            if a is not None and not 0.0 < a <= MAX_ALPHA + 1e-12:
                raise ParameterDomainError(f"{name} must lie in (0, 4/7], got {a}")

    @property
    def joint_decay(self) -> float:
        return self.alpha if self.alpha_joint is None else self.alpha_joint


def epsilon_r(n: int, alpha: float) -> float:
    if n < 1:
        raise ParameterDomainError("n must be at least 1")
    return 1.0 / n ** alpha


def epsilon_j(t: int, alpha: float) -> float:
    if t < 1:
        raise ParameterDomainError("joint exploration schedule is defined for t >= 1")
    return 1.0 / t ** alpha


def action_probabilities(t: int, n: int, params: AlgorithmParams) -> tuple[float, float, float]:
    """(random, joint, exploit) probabilities at step ``t``.

    Random exploration keeps its full rate; joint exploration is clipped to
    whatever mass is left so the three never go negative.
    """
    p_r = epsilon_r(n, params.alpha)
    p_j = min(epsilon_j(t, params.joint_decay), 1.0 - p_r)
    return p_r, p_j, max(0.0, 1.0 - p_r - p_j)


def sample_action(t: int, n: int, params: AlgorithmParams, rng: np.random.Generator) -> ActionKind:
    p_r, p_j, _ = action_probabilities(t, n, params)
    draw = rng.random()
    if draw < p_r:
        return ActionKind.RANDOM_EXPLORE
    if draw < p_r + p_j:
        return ActionKind.JOINT_EXPLORE
    return ActionKind.EXPLOIT


def neighbor_test(tilde: np.ndarray, theta: float, exclude_empty_overlap: bool = False) -> np.ndarray:
    """(n, n) boolean matrix of ``<Y_u, Y_v> >= theta * |supp(Y_u) & supp(Y_v)|``.

    ``tilde`` holds the joint-restricted ratings in {-1, 0, +1}. Pairs with no
    overlap pass (0 >= 0) unless ``exclude_empty_overlap`` is set.
    """
    y = tilde.astype(np.float64)
    inner = y @ y.T
    support = np.abs(y)
    overlap = support @ support.T
    nb = inner - theta * overlap >= -_THRESHOLD_EPS
    if exclude_empty_overlap:
        nb &= overlap > 0
        np.fill_diagonal(nb, True)
    return nb


def joint_neighbor_matrix(state: SessionState, params: AlgorithmParams) -> np.ndarray:
    """:func:`neighbor_test` on the jointly explored columns only (the rest are zero)."""
    tilde = state.ratings[:, state.joint_items]
    return neighbor_test(tilde, params.theta, params.exclude_empty_overlap)


def neighborhood(state: SessionState, u: int, theta: float, exclude_empty_overlap: bool = False) -> np.ndarray:
    """Sorted indices of the users in ``u``'s neighbourhood (``u`` included)."""
    tilde = state.revealed_joint_matrix()
    y = tilde.astype(float)
    inner = y @ y[u]
    overlap = np.abs(y) @ np.abs(y[u])
    ok = inner - theta * overlap >= -_THRESHOLD_EPS
    if exclude_empty_overlap:
        ok &= overlap > 0
        ok[u] = True
    return np.flatnonzero(ok)


def score(state: SessionState, u: int, i: int, neighbors) -> float:
    """Fraction of neighbours who liked ``i`` among those who rated it; 1/2 if none did."""
    col = state.ratings[np.asarray(list(neighbors), dtype=np.int64), i]
    rated = np.count_nonzero(col)
    if rated == 0:
        return 0.5
    return np.count_nonzero(col == 1) / rated


def score_matrix(state: SessionState, nb: np.ndarray) -> np.ndarray:
    """Scores of every item for every row of a neighbour matrix."""
    # users with the same neighbourhood share scores; typically only a few distinct rows
    packed = np.ascontiguousarray(np.packbits(nb, axis=1))
    keys = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    return _score_rows(state, nb[first])[inverse.reshape(-1)]


def _score_rows(state: SessionState, nb: np.ndarray) -> np.ndarray:
    # float32 is exact here: all products are integer counts below 2**24
    w = nb.astype(np.float32)
    plus = w @ (state.ratings == 1).astype(np.float32)
    rated = w @ (state.ratings != 0).astype(np.float32)
    return np.where(rated > 0, plus.astype(np.float64) / np.maximum(rated, 1.0), 0.5)


def exploit_all(state: SessionState, params: AlgorithmParams, seed: int) -> np.ndarray:
    scores = score_matrix(state, joint_neighbor_matrix(state, params))
    return argmax_unconsumed(scores, state.consumed, tie_keys(seed, state.t, state.n, state.m))


def exploit_recommend(state: SessionState, u: int, params: AlgorithmParams, seed: int = 0) -> int:
    """Highest-scoring unconsumed item for one user; same choice as :func:`exploit_all`."""
    if state.consumed[u].all():
        raise ExhaustedError(f"user {u} has consumed every item")
    nbrs = neighborhood(state, u, params.theta, params.exclude_empty_overlap)
    row = score_matrix(state, _indicator(nbrs, state.n)[None, :])
    keys = tie_keys(seed, state.t, state.n, state.m)[u : u + 1]
    return int(argmax_unconsumed(row, state.consumed[u : u + 1], keys)[0])


def _indicator(idx: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size, dtype=bool)
    out[idx] = True
    return out


def step(state: SessionState, params: AlgorithmParams, seed: int) -> tuple[np.ndarray, ActionKind]:
    """Recommendations for every user at the next time step (does not mutate ``state``)."""
    check_available(state)
    t = state.t + 1
    action = sample_action(t, state.n, params, _rng.derive(seed, _rng.ACTION, t))
    if action is ActionKind.RANDOM_EXPLORE:
        recs = random_unconsumed(state, seed)
    elif action is ActionKind.JOINT_EXPLORE:
        recs = next_joint_items(state)
    else:
        recs = exploit_all(state, params, seed)
    return recs, action


class CollaborativeGreedy(Policy):
    name = "collaborative_greedy"

    def __init__(self, params: AlgorithmParams):
        self.params = params

    def recommend(self, state, seed):
        return step(state, self.params, seed)
