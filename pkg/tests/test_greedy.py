from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collabgreedy import rng as _rng
from collabgreedy.errors import ExhaustedError, ParameterDomainError
from collabgreedy.greedy import (
    AlgorithmParams,
    CollaborativeGreedy,
    action_probabilities,
    epsilon_j,
    epsilon_r,
    exploit_all,
    exploit_recommend,
    neighbor_test,
    neighborhood,
    sample_action,
    score,
    step,
)
from collabgreedy.latent_model import generate_population
from collabgreedy.policy import ActionKind
from collabgreedy.simulator import SyntheticEnvironment, run
from collabgreedy.state import new_session, record_step

from conftest import play


def restricted_cosine_at_least(a, b, theta) -> bool:
    """Exact oracle: cosine over the common support, compared as rationals."""
    omega = [i for i in range(len(a)) if a[i] != 0 and b[i] != 0]
    dot = sum(a[i] * b[i] for i in omega)
    norm_a = sum(a[i] ** 2 for i in omega)
    norm_b = sum(b[i] ** 2 for i in omega)
    th = Fraction(str(theta))
    # dot / sqrt(norm_a * norm_b) >= th, with th >= 0
    if dot < 0:
        return False
    return Fraction(dot) ** 2 >= th ** 2 * norm_a * norm_b


@pytest.mark.parametrize("n, alpha, expected", [(16, 0.5, 0.25), (1, 0.3, 1.0), (10_000, 0.5, 0.01)])
def test_epsilon_r(n, alpha, expected):
    assert epsilon_r(n, alpha) == pytest.approx(expected)


@pytest.mark.parametrize("t, alpha, expected", [(1, 0.4, 1.0), (4, 0.5, 0.5), (100, 0.5, 0.1)])
def test_epsilon_j(t, alpha, expected):
    assert epsilon_j(t, alpha) == pytest.approx(expected)


def test_epsilon_j_rejects_zero():
    with pytest.raises(ParameterDomainError):
        epsilon_j(0, 0.5)


@pytest.mark.parametrize("theta, alpha", [(-0.1, 0.5), (1.1, 0.5), (0.5, 0.0), (0.5, 0.6)])
def test_params_domain(theta, alpha):
    with pytest.raises(ParameterDomainError):
        AlgorithmParams(theta, alpha)


def test_params_accept_four_sevenths():
    AlgorithmParams(0.5, 4 / 7)


def test_action_probabilities_clip_at_first_step():
    p_r, p_j, p_e = action_probabilities(1, 2, AlgorithmParams(0.5, 0.5))
    assert p_r == pytest.approx(0.7071067811865476)
    assert p_j == pytest.approx(1 - 0.7071067811865476)
    assert p_e == 0.0


def test_first_step_always_explores():
    params = AlgorithmParams(0.5, 0.5)
    for seed in range(300):
        assert sample_action(1, 2, params, np.random.default_rng(seed)) is not ActionKind.EXPLOIT


def test_large_n_and_t_mostly_exploit():
    params = AlgorithmParams(0.5, 0.5)
    g = np.random.default_rng(0)
    draws = [sample_action(10**8, 10**8, params, g) for _ in range(2000)]
    assert draws.count(ActionKind.EXPLOIT) >= 1995


def test_sample_action_frequencies():
    params = AlgorithmParams(0.5, 0.5)
    g = np.random.default_rng(3)
    draws = [sample_action(16, 16, params, g) for _ in range(20_000)]
    # p_r = 0.25, p_j = 0.25; binomial sd ~0.003
    assert draws.count(ActionKind.RANDOM_EXPLORE) / 20_000 == pytest.approx(0.25, abs=0.015)
    assert draws.count(ActionKind.JOINT_EXPLORE) / 20_000 == pytest.approx(0.25, abs=0.015)


def test_sample_action_deterministic():
    params = AlgorithmParams(0.3, 0.4)
    a = [sample_action(t, 9, params, _rng.derive(5, _rng.ACTION, t)) for t in range(1, 50)]
    b = [sample_action(t, 9, params, _rng.derive(5, _rng.ACTION, t)) for t in range(1, 50)]
    assert a == b


def _state_with_joint(rows):
    rows = np.array(rows, dtype=np.int8)
    n, m = rows.shape
    s = new_session(n, m, seed=0)
    s.sigma = np.arange(m)
    s.ratings[:] = rows
    s.consumed[:] = rows != 0
    s.joint_count = m
    s.t = m
    return s


def test_identical_vectors_are_neighbours_at_theta_one():
    s = _state_with_joint([[1, 1, -1, 0], [1, 1, -1, 0]])
    assert neighborhood(s, 0, 1.0).tolist() == [0, 1]


def test_disagreeing_vectors_are_not_neighbours():
    s = _state_with_joint([[1, 1, -1, 0], [1, -1, -1, 0]])
    assert neighborhood(s, 0, 0.5).tolist() == [0]


def test_all_zero_vectors_everyone_neighbours():
    s = new_session(4, 3, seed=0)
    assert neighborhood(s, 2, 0.7).tolist() == [0, 1, 2, 3]
    assert neighbor_test(s.revealed_joint_matrix(), 0.7).all()


def test_exclude_empty_overlap_flag():
    s = new_session(3, 3, seed=0)
    assert neighborhood(s, 1, 0.5, exclude_empty_overlap=True).tolist() == [1]


def test_cosine_equivalence_exact():
    g = np.random.default_rng(2024)
    checked = 0
    while checked < 1000:
        a, b = g.integers(-1, 2, size=(2, 12))
        if not np.any((a != 0) & (b != 0)):
            continue
        checked += 1
        for theta in (0.1, 0.5, 0.9):
            nb = neighbor_test(np.stack([a, b]), theta)
            assert nb[0, 1] == restricted_cosine_at_least(a.tolist(), b.tolist(), theta)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.sampled_from([-1, 0, 1]), min_size=6, max_size=6), min_size=2, max_size=6),
       st.sampled_from([0.0, 0.2, 0.5, 0.7, 1.0]))
def test_neighbour_test_symmetric_and_reflexive(rows, theta):
    nb = neighbor_test(np.array(rows), theta)
    assert np.array_equal(nb, nb.T)
    assert nb.diagonal().all()


def test_ratings_outside_prefix_do_not_change_neighbourhoods():
    s = new_session(3, 6, seed=0)
    s.sigma = np.arange(6)
    play(s, [0, 0, 0], [1, 1, -1], joint=True)
    before = [neighborhood(s, u, 0.5).tolist() for u in range(3)]
    play(s, [4, 5, 3], [1, -1, 1])
    after = [neighborhood(s, u, 0.5).tolist() for u in range(3)]
    assert before == after


def test_score_examples():
    s = new_session(4, 3, seed=0)
    assert score(s, 0, 2, [0, 1, 2, 3]) == 0.5
    s.ratings[:3, 1] = [1, 1, -1]
    assert score(s, 0, 1, [0, 1, 2, 3]) == pytest.approx(2 / 3)
    assert score(s, 0, 1, [3, 2, 1, 0]) == pytest.approx(2 / 3)
    s.ratings[:, 0] = 1
    assert score(s, 0, 0, [1, 2]) == 1.0


def test_exploit_prefers_unique_max():
    s = new_session(2, 3, seed=0)
    s.ratings[1] = [1, 0, 0]
    s.consumed[1] = [True, False, False]
    params = AlgorithmParams(0.0, 0.5)
    # user 0: item 0 scores 1.0, items 1 and 2 score 0.5
    assert exploit_recommend(s, 0, params, seed=3) == 0


def test_exploit_skips_consumed_best():
    s = new_session(2, 3, seed=0)
    s.ratings[1] = [1, -1, 0]
    s.consumed[1] = [True, True, False]
    s.ratings[0, 0] = 1
    s.consumed[0, 0] = True
    params = AlgorithmParams(0.0, 0.5)
    # item 0 is taken; item 2 (score 0.5) beats item 1 (score 0)
    assert exploit_recommend(s, 0, params, seed=1) == 2


def test_exploit_cold_start_is_uniform():
    s = new_session(1, 4, seed=0)
    s.consumed[0, 1] = True
    params = AlgorithmParams(0.5, 0.5)
    counts = np.zeros(4)
    for seed in range(4000):
        counts[exploit_recommend(s, 0, params, seed=seed)] += 1
    assert counts[1] == 0
    # chi-square with 2 dof, critical value at 0.999 is 13.8
    expected = 4000 / 3
    chi2 = ((counts[[0, 2, 3]] - expected) ** 2 / expected).sum()
    assert chi2 < 13.8


def test_exploit_exhaustion():
    s = new_session(1, 2, seed=0)
    s.consumed[:] = True
    with pytest.raises(ExhaustedError):
        exploit_recommend(s, 0, AlgorithmParams(0.5, 0.5))


def test_per_user_exploit_matches_batch():
    pop = generate_population(2, 30, 12, scheme="noiseless", seed=2)
    env = SyntheticEnvironment(pop, 2)
    params = AlgorithmParams(0.5, 0.5)
    res = run(env, CollaborativeGreedy(params), 12, seed=4)
    batch = exploit_all(res.state, params, seed=4)
    single = [exploit_recommend(res.state, u, params, seed=4) for u in range(pop.n)]
    assert batch.tolist() == single


def test_joint_step_gives_everyone_next_sigma_item():
    s = new_session(5, 7, seed=3)
    params = AlgorithmParams(0.5, 0.5)
    for seed in range(200):
        recs, action = step(s, params, seed)
        if action is ActionKind.JOINT_EXPLORE:
            assert np.all(recs == s.sigma[0])
            break
    else:
        pytest.fail("no joint step drawn")


def test_m_steps_exhaust_every_item():
    pop = generate_population(2, 15, 6, scheme="noiseless", seed=1)
    res = run(SyntheticEnvironment(pop, 1), CollaborativeGreedy(AlgorithmParams(0.5, 0.5)), 15, seed=1)
    assert res.state.consumed.all()
    with pytest.raises(ExhaustedError):
        step(res.state, AlgorithmParams(0.5, 0.5), 1)


def test_trajectory_is_deterministic():
    pop = generate_population(3, 25, 20, 0.3, scheme="symmetric", seed=8)
    env = SyntheticEnvironment(pop, 8)
    params = AlgorithmParams(0.3, 0.4)
    a = run(env, CollaborativeGreedy(params), 25, seed=5)
    b = run(env, CollaborativeGreedy(params), 25, seed=5)
    assert a.metrics == b.metrics
    assert np.array_equal(a.state.ratings, b.state.ratings)


def test_step_does_not_mutate_state():
    s = new_session(3, 4, seed=0)
    before = s.to_json()
    step(s, AlgorithmParams(0.5, 0.5), 0)
    assert s.to_json() == before
    recs, action = step(s, AlgorithmParams(0.5, 0.5), 0)
    record_step(s, recs, np.ones(3), action is ActionKind.JOINT_EXPLORE)
    assert s.t == 1
