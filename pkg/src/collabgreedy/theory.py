"""Closed-form learning-time and tail quantities, with Monte Carlo checks.

Each ``*_check`` function simulates the random quantity a bound talks about
and reports whether the empirical tail frequency stays below the bound plus
a three-sigma binomial allowance.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as _rng
from .errors import ParameterDomainError, UnsupportedModeError
from .greedy import MAX_ALPHA, AlgorithmParams, action_probabilities, neighborhood
from .latent_model import Population, compute_gamma_hat, generate_population
from .simulator import SyntheticEnvironment
from .state import SessionState, new_session, next_joint_items, record_step


@dataclass(frozen=True)
class BoundInputs:
    n: int
    m: int
    k: int
    delta: float
    gamma: float
    alpha: float
    delta_tol: float
    t: int = 1
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta <= 0.5:
            raise ParameterDomainError(f"delta must lie in (0, 1/2], got {self.delta}")
        if not 0 <= self.gamma < 1:
            raise ParameterDomainError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0 < self.alpha <= MAX_ALPHA + 1e-12:
            raise ParameterDomainError(f"alpha must lie in (0, 4/7], got {self.alpha}")
        if not 0 < self.delta_tol < 1:
            raise ParameterDomainError(f"tolerance must lie in (0, 1), got {self.delta_tol}")


@dataclass
class CheckResult:
    check: str
    inputs: dict
    empirical: float
    bound: float
    slack: float
    passed: bool
    applicable: bool = True
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


@dataclass(frozen=True)
class GoodNeighborhoodStats:
    n_good: int
    n_bad: int
    good_threshold: float
    bad_threshold: float

    @property
    def event_holds(self) -> bool:
        return self.n_good >= self.good_threshold and self.n_bad <= self.bad_threshold


def t_learn(inputs: BoundInputs) -> float:
    """Learning horizon, up to the unknown constants ``c1`` and ``c2``."""
    b = inputs
    if b.gamma >= 1:
        raise ParameterDomainError("t_learn is undefined for gamma >= 1")
    first = math.log(b.k * b.m / (b.delta * b.delta_tol)) / (b.delta ** 4 * (1 - b.gamma) ** 2)
    return b.c1 * first ** (1 / (1 - b.alpha)) + _scaled_power(b.c2, 4 / b.delta_tol, 1 / b.alpha)


def _scaled_power(c: float, base: float, exponent: float) -> float:
    if c == 0:
        return 0.0
    try:
        return c * base ** exponent
    except OverflowError:
        return math.inf


def beta(delta: float, gamma: float, t: float, alpha: float) -> float:
    if t < 1:
        raise ParameterDomainError("beta is defined for t >= 1")
    return math.exp(-(delta ** 4) * (1 - gamma) ** 2 * t ** (1 - alpha))


def mc_slack(bound: float, trials: int) -> float:
    return 3.0 * math.sqrt(bound * (1.0 - bound) / trials)


def lemma4_check(n: int, k: int, trials: int = 100_000, seed: int = 0, chunk: int = 10_000) -> CheckResult:
    """Frequency with which user 0's type has at most ``n / 2k`` members.

    Each trial assigns all ``n`` users an i.i.d. uniform type.
    """
    if trials < 1000:
        raise ParameterDomainError("lemma4_check needs at least 1000 trials")
    g = _rng.derive(seed, _rng.TRIAL, 4)
    hits = 0
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        types = g.integers(k, size=(size, n), dtype=np.int32)
        members = (types == types[:, :1]).sum(axis=1)
        hits += int(np.count_nonzero(members <= n / (2 * k)))
        done += size
    empirical = hits / trials
    bound = math.exp(-n / (8 * k))
    slack = mc_slack(bound, trials)
    return CheckResult("lemma4", {"n": n, "k": k, "trials": trials, "seed": seed},
                       empirical, bound, slack, empirical <= bound + slack)


def lemma5_check(t: int, alpha: float, trials: int = 10_000, seed: int = 0,
                 chunk_cells: int = 5_000_000) -> CheckResult:
    """Frequency with which fewer than ``t^(1-alpha) / 2`` of ``t`` steps were joint steps.

    Step ``s`` is a joint step independently with probability ``s^-alpha``.
    """
    if not 0 < alpha <= MAX_ALPHA + 1e-12:
        raise ParameterDomainError(f"alpha must lie in (0, 4/7], got {alpha}")
    if t < 1 or trials < 1:
        raise ParameterDomainError("need t >= 1 and trials >= 1")
    probs = np.arange(1, t + 1, dtype=float) ** -alpha
    need = t ** (1 - alpha) / 2
    g = _rng.derive(seed, _rng.TRIAL, 5)
    rows = max(1, chunk_cells // t)
    hits = done = 0
    while done < trials:
        size = min(rows, trials - done)
        counts = (g.random((size, t)) < probs).sum(axis=1)
        hits += int(np.count_nonzero(counts < need))
        done += size
    empirical = hits / trials
    bound = math.exp(-t ** (1 - alpha) / 20)
    slack = mc_slack(bound, trials)
    return CheckResult("lemma5", {"t": t, "alpha": alpha, "trials": trials, "seed": seed},
                       empirical, bound, slack, empirical <= bound + slack)


def good_neighborhood_stats(state: SessionState, u: int, pop: Population | None,
                            params: AlgorithmParams, t: int | None = None) -> GoodNeighborhoodStats:
    """Count ``u``'s same-type and other-type neighbours against the good-event thresholds."""
    if pop is None:
        raise UnsupportedModeError("good-neighbourhood statistics need ground-truth user types")
    t = state.t if t is None else t
    nbrs = neighborhood(state, u, params.theta, params.exclude_empty_overlap)
    same = pop.assignment[nbrs] == pop.assignment[u]
    n, k, m = pop.n, pop.k, pop.m
    return GoodNeighborhoodStats(
        n_good=int(np.count_nonzero(same)),
        n_bad=int(np.count_nonzero(~same)),
        good_threshold=n / (5 * k),
        bad_threshold=pop.delta * t * n ** (1 - params.alpha) / (10 * k * m),
    )


def lemma1_threshold_time(n: int, m: int, k: int, delta: float, gamma: float, alpha: float) -> float:
    """Smallest ``t`` at which the good-event probability bound is claimed."""
    x = 2 * math.log(10 * k * m * n ** alpha / delta) / (delta ** 4 * (1 - gamma) ** 2)
    return x ** (1 / (1 - alpha))


def lemma1_bound(n: int, k: int, delta: float, gamma: float, alpha: float, t: float) -> float:
    return (1 - math.exp(-n / (8 * k))
            - 12 * math.exp(-(delta ** 4) * (1 - gamma) ** 2 * t ** (1 - alpha) / 20))


def joint_only_session(env: SyntheticEnvironment, joint_steps: int, seed: int) -> SessionState:
    """Session after ``joint_steps`` joint-exploration steps and nothing else.

    Joint-restricted ratings only depend on how many joint steps happened:
    a joint step hands every user the earliest unconsumed item of ``sigma``,
    so after ``J`` of them every user has rated the first ``J`` items of
    ``sigma``, and ratings are frozen per (user, item). Neighbourhoods at any
    time ``t`` are therefore those of this reduced session.
    """
    state = new_session(env.n, env.m, seed)
    users = np.arange(env.n)
    for _ in range(joint_steps):
        recs = next_joint_items(state)
        record_step(state, recs, env.matrix[users, recs], was_joint=True)
    return state


def egood_check(n: int, m: int, k: int, t: int, alpha: float, trials: int = 200, seed: int = 0,
                delta: float = 0.5, scheme: str = "noiseless", theta: float | None = None) -> CheckResult:
    """Frequency of the good-neighbourhood event for user 0 at time ``t``.

    Each trial draws a fresh population and environment, samples the action
    sequence of ``t`` steps to get the joint-step count, and evaluates user
    0's neighbourhood. The empirical frequency is compared with the
    probability lower bound only inside the bound's premise region and where
    the bound is positive; elsewhere ``applicable`` is False.
    """
    held = 0
    gammas = []
    for trial in range(trials):
        pop = generate_population(k, m, n, delta, scheme=scheme, seed=_trial_seed(seed, trial))
        env = SyntheticEnvironment(pop, _trial_seed(seed, trial))
        gamma = max(compute_gamma_hat(pop), 0.0)
        gammas.append(gamma)
        th = theta if theta is not None else min(1.0, 2 * pop.delta ** 2 * (1 + gamma))
        params = AlgorithmParams(th, alpha)
        g = _rng.derive(seed, _rng.TRIAL, 1, trial)
        joint = 0
        for s in range(1, t + 1):
            p_r, p_j, _ = action_probabilities(s, n, params)
            draw = g.random()
            if p_r <= draw < p_r + p_j and joint < m:
                joint += 1
        state = joint_only_session(env, joint, seed)
        held += good_neighborhood_stats(state, 0, pop, params, t).event_holds
    empirical = held / trials
    gamma = float(np.mean(gammas))
    premise = lemma1_threshold_time(n, m, k, delta if scheme != "noiseless" else 0.5, gamma, alpha)
    bound = lemma1_bound(n, k, delta if scheme != "noiseless" else 0.5, gamma, alpha, t)
    applicable = t >= premise and bound > 0
    # lower bound on a probability: allow three sigma below it
    slack = mc_slack(min(max(bound, 0.0), 1.0), trials)
    passed = (not applicable) or empirical >= bound - slack
    return CheckResult("egood", {"n": n, "m": m, "k": k, "t": t, "alpha": alpha, "trials": trials,
                                 "seed": seed, "delta": delta, "scheme": scheme},
                       empirical, bound, slack, passed, applicable,
                       {"premise_t": premise, "mean_gamma_hat": gamma})


def _trial_seed(seed: int, trial: int) -> int:
    return int(_rng.derive(seed, _rng.TRIAL, 2, trial).integers(2**31))

