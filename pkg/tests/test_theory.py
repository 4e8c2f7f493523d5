import math

import numpy as np
import pytest

from collabgreedy.errors import ParameterDomainError, UnsupportedModeError
from collabgreedy.greedy import AlgorithmParams
from collabgreedy.latent_model import generate_population
from collabgreedy.simulator import ReplayEnvironment, SyntheticEnvironment, run
from collabgreedy.state import new_session
from collabgreedy.theory import (
    BoundInputs,
    GoodNeighborhoodStats,
    beta,
    egood_check,
    good_neighborhood_stats,
    joint_only_session,
    lemma1_bound,
    lemma1_threshold_time,
    lemma4_check,
    lemma5_check,
    mc_slack,
    t_learn,
)
from collabgreedy.greedy import CollaborativeGreedy


def inputs(**kw):
    base = dict(n=100, m=8, k=2, delta=0.5, gamma=0.0, alpha=0.5, delta_tol=0.5)
    base.update(kw)
    return BoundInputs(**base)


def test_t_learn_frozen_value():
    # evaluated independently at 30 digits
    assert t_learn(inputs()) == pytest.approx(4491.85497627, rel=1e-10)


def test_t_learn_small_alpha_limit():
    first = math.log(2 * 8 / (0.5 * 0.5)) / 0.5 ** 4
    b = inputs(alpha=1e-9, c2=0.0)
    assert t_learn(b) == pytest.approx(first, rel=1e-6)


@pytest.mark.parametrize("field, lo, hi", [("m", 8, 16), ("k", 2, 4)])
def test_t_learn_grows(field, lo, hi):
    assert t_learn(inputs(**{field: hi})) > t_learn(inputs(**{field: lo}))


def test_t_learn_grows_as_tolerance_shrinks():
    assert t_learn(inputs(delta_tol=0.1)) > t_learn(inputs(delta_tol=0.5))


@pytest.mark.parametrize("kw", [dict(gamma=1.0), dict(delta=0.6), dict(alpha=0.6), dict(delta_tol=1.0)])
def test_bound_inputs_domain(kw):
    with pytest.raises(ParameterDomainError):
        inputs(**kw)


def test_beta_values():
    assert beta(0.5, 0.0, 1e4, 0.5) == pytest.approx(0.00193045413622771, rel=1e-12)
    t = (math.log(10) / 0.5 ** 4) ** 2
    assert beta(0.5, 0.0, t, 0.5) == pytest.approx(0.1)
    assert beta(0.5, 1 - 1e-12, 1e4, 0.5) == pytest.approx(1.0)


def test_beta_monotone():
    ts = [1, 10, 100, 1000]
    vals = [beta(0.3, 0.2, t, 0.4) for t in ts]
    assert vals == sorted(vals, reverse=True)
    assert beta(0.5, 0.2, 100, 0.4) <= beta(0.3, 0.2, 100, 0.4)


def test_mc_slack():
    assert mc_slack(0.5, 100) == pytest.approx(0.15)
    assert mc_slack(0.0, 100) == 0.0


def test_lemma4_single_type_never_small():
    res = lemma4_check(50, 1, trials=2000)
    assert res.empirical == 0.0 and res.passed


def test_lemma4_headline():
    res = lemma4_check(200, 4, trials=100_000)
    assert res.bound == pytest.approx(0.00193045413622771, rel=1e-12)
    assert res.passed


def test_lemma4_n_equals_8k():
    res = lemma4_check(32, 4, trials=20_000)
    assert res.bound == pytest.approx(0.367879441171442, rel=1e-12)
    assert res.passed


@pytest.mark.parametrize("seed", range(10))
def test_lemma4_seed_grid(seed):
    assert lemma4_check(40, 2, trials=5000, seed=seed).passed


def test_lemma4_rejects_few_trials():
    with pytest.raises(ParameterDomainError):
        lemma4_check(10, 2, trials=10)


def test_lemma5_t_one_is_never_short():
    assert lemma5_check(1, 0.5, trials=500).empirical == 0.0


def test_lemma5_small():
    res = lemma5_check(100, 0.5, trials=10_000)
    assert res.bound == pytest.approx(0.606530659712633, rel=1e-12)
    assert res.passed


@pytest.mark.parametrize("seed", range(10))
def test_lemma5_seed_grid(seed):
    assert lemma5_check(200, 0.4, trials=2000, seed=seed).passed


def test_lemma5_domain():
    with pytest.raises(ParameterDomainError):
        lemma5_check(10, 0.7)


def test_good_thresholds_arithmetic():
    pop = generate_population(2, 50, 100, scheme="noiseless", seed=0)
    stats = good_neighborhood_stats(new_session(100, 50, 0), 0, pop, AlgorithmParams(0.5, 0.5), t=64)
    assert stats.good_threshold == 10
    assert stats.bad_threshold == pytest.approx(0.32)


def test_event_holds_definition():
    assert GoodNeighborhoodStats(10, 0, 10, 0.32).event_holds
    assert not GoodNeighborhoodStats(9, 0, 10, 0.32).event_holds
    assert not GoodNeighborhoodStats(10, 1, 10, 0.32).event_holds


def test_single_type_has_no_bad_neighbours():
    pop = generate_population(1, 30, 20, 0.3, scheme="symmetric", seed=1)
    res = run(SyntheticEnvironment(pop, 1), CollaborativeGreedy(AlgorithmParams(0.5, 0.5)), 20, seed=1)
    for u in range(20):
        assert good_neighborhood_stats(res.state, u, pop, AlgorithmParams(0.5, 0.5)).n_bad == 0


def test_replay_has_no_types():
    env = ReplayEnvironment(np.ones((3, 4), dtype=int))
    with pytest.raises(UnsupportedModeError):
        good_neighborhood_stats(new_session(3, 4, 0), 0, env.population, AlgorithmParams(0.5, 0.5))


def test_joint_only_session_prefix():
    pop = generate_population(2, 10, 6, scheme="noiseless", seed=3)
    env = SyntheticEnvironment(pop, 3)
    s = joint_only_session(env, 4, seed=3)
    assert s.joint_count == 4
    assert np.array_equal(s.ratings[:, s.sigma[:4]], env.matrix[:, s.sigma[:4]])
    assert s.consumed.sum() == 24


@pytest.mark.parametrize("seed", range(20))
def test_more_joint_steps_never_lose_same_type_neighbours(seed):
    g = np.random.default_rng(seed)
    n, m, k = int(g.integers(2, 11)), int(g.integers(2, 11)), int(g.integers(1, 4))
    pop = generate_population(k, m, n, scheme="noiseless", seed=seed)
    env = SyntheticEnvironment(pop, seed)
    params = AlgorithmParams(float(g.choice([0.0, 0.3, 0.5, 1.0])), 0.5)
    previous = None
    for joint in range(m + 1):
        state = joint_only_session(env, joint, seed)
        good = [good_neighborhood_stats(state, u, pop, params).n_good for u in range(n)]
        if previous is not None:
            assert all(a >= b for a, b in zip(good, previous))
        previous = good


def test_lemma1_premise_and_bound():
    premise = lemma1_threshold_time(100, 2000, 2, 0.5, 0.0, 0.1)
    assert 700 < premise < 760
    assert lemma1_bound(100, 2, 0.5, 0.0, 0.1, 1700) > 0


def test_egood_outside_premise_is_not_applicable():
    res = egood_check(20, 30, 2, 10, 0.5, trials=3)
    assert not res.applicable and res.passed
    assert set(res.to_dict()) >= {"check", "inputs", "empirical", "bound", "slack", "pass"}


@pytest.mark.slow
def test_egood_inside_premise():
    res = egood_check(100, 2000, 2, 1700, 0.1, trials=20)
    assert res.applicable
    assert res.passed
