import pathlib
import sys

import pytest

here = pathlib.Path(__file__).resolve().parent
sys.path.insert(0, str(here.parent / 'tasklearn' / 'src'))
sys.path.insert(0, str(here.parent / 'experiments'))

from tasklearn import mdp_env  # noqa: E402
from tasklearn import product_model  # noqa: E402
from tasklearn import worlds  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: trains Baum-Welch to convergence')


def ground_truth_chain(mdp, ta):
    product = product_model.build_product(mdp, ta)
    return product_model.induce_chain(product, mdp_env.uniform_random_policy(mdp))


def simulate(mdp, ta, episode_len, n_episodes, seed=0):
    return mdp_env.simulate_episodes(mdp, ta, mdp_env.uniform_random_policy(mdp), episode_len, n_episodes, seed)


@pytest.fixture
def lumping():
    """3x3 grid with two coffee cells, and the coffee-then-stairs task."""
    mdp = worlds.gridworld('lumping')
    return mdp, worlds.task_automaton('coffee_stairs', mdp.label_set())


@pytest.fixture
def library():
    """3x3 grid where the book can only be reached from a carpet, with the book and carpet-then-book tasks."""
    mdp = worlds.gridworld('library')
    return mdp, worlds.task_automaton('book', mdp.label_set()), worlds.task_automaton('carpet_book', mdp.label_set())


@pytest.fixture
def office():
    mdp = worlds.gridworld('office')
    return mdp, worlds.task_automaton('book', mdp.label_set()), worlds.task_automaton('carpet_book', mdp.label_set())
