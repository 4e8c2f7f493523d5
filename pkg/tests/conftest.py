import numpy as np
import pytest

from collabgreedy.latent_model import Population
from collabgreedy.state import new_session, record_step


def make_pop(sources, assignment=None, delta=0.25):
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    if assignment is None:
        assignment = np.arange(sources.shape[0])
    return Population(sources, np.asarray(assignment), delta)


def play(state, recs, ratings, joint=False):
    return record_step(state, np.asarray(recs), np.asarray(ratings), joint)


@pytest.fixture
def small_state():
    state = new_session(3, 5, seed=1)
    state.sigma = np.array([2, 0, 1, 4, 3])
    return state
