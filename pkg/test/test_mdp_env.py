import numpy as np
import pytest

from tasklearn import automata
from tasklearn import mdp_env
from tasklearn import worlds

import conftest


def test_layout_and_labels():
    mdp = worlds.gridworld('lumping')
    assert (mdp.width, mdp.height, mdp.num_states) == (3, 3, 9)
    assert mdp.initial_state == 0
    assert mdp.labels[mdp.state_of(2, 0)] == automata.make_label('stairs')
    assert mdp.labels[mdp.state_of(0, 2)] == automata.make_label('coffee')
    assert mdp.labels[mdp.state_of(1, 2)] == automata.make_label('coffee')
    assert mdp.label_set() == {automata.EMPTY, automata.make_label('coffee'), automata.make_label('stairs')}
    assert worlds.gridworld('office').num_states == 25


def test_moves():
    mdp = mdp_env.build_gridworld(3, 3, {})
    centre = mdp.state_of(1, 1)
    assert [mdp_env.move(mdp, centre, action) for action in mdp.actions] == [7, 1, 3, 5]
    assert mdp_env.move(mdp, 0, 'left') == 0
    assert mdp_env.move(mdp, 0, 'down') == 0
    assert mdp_env.move(mdp, 0, 'up') == 3
    assert mdp.num_walls(0) == 2
    assert mdp.num_walls(centre) == 0


def test_single_cell():
    mdp = mdp_env.build_gridworld(1, 1, {(0, 0): 'coffee'})
    assert (mdp.successors == 0).all()
    chain = mdp_env.induced_chain(mdp, mdp_env.uniform_random_policy(mdp))
    assert chain.tolist() == [[1.]]
    assert mdp_env.count_trajectories(chain, 0, 3) == 4


@pytest.mark.parametrize('cell', [(3, 0), (0, -1), (5, 5)])
def test_out_of_range(cell):
    with pytest.raises(mdp_env.GridError):
        mdp_env.build_gridworld(3, 3, {cell: 'coffee'})
    with pytest.raises(mdp_env.GridError):
        mdp_env.build_gridworld(3, 3, {}, initial_cell=cell)


def test_induced_chain():
    mdp = mdp_env.build_gridworld(3, 3, {})
    chain = mdp_env.induced_chain(mdp, mdp_env.uniform_random_policy(mdp))
    assert np.allclose(chain.sum(axis=1), 1, rtol=0, atol=1e-12)
    assert chain[4, [1, 3, 5, 7]].tolist() == [0.25] * 4
    assert chain[0, 0] == 0.5
    assert chain[1, 1] == 0.25


def test_policy_validation():
    with pytest.raises(ValueError):
        mdp_env.Policy(np.full((2, 4), 0.3))
    with pytest.raises(ValueError):
        mdp_env.Policy(np.full((2, 3), 1 / 3))


def test_episode_validation():
    with pytest.raises(ValueError):
        mdp_env.Episode([0, 1], ['.'], [0, 0])
    with pytest.raises(ValueError):
        mdp_env.Episode([0, 1], ['.', '.'], [1, 0])
    mdp = worlds.gridworld('lumping')
    with pytest.raises(ValueError):
        mdp_env.Episode([0, 1], ['.', 'coffee'], [0, 0]).check_labelling(mdp)


def test_simulation(lumping):
    mdp, ta = lumping
    episodes = conftest.simulate(mdp, ta, 12, 50, seed=3)
    assert len(episodes) == 50
    for episode in episodes:
        assert len(episode) == 13
        episode.check_labelling(mdp)
        assert episode.states[0] == mdp.initial_state
        for before, after in zip(episode.states, episode.states[1:]):
            assert after in mdp.successors[:, before]
        # the hidden automaton reads the labels of the states moved into
        state = ta.initial
        for t, (label, reward) in enumerate(zip(episode.trace, episode.rewards)):
            if t > 0:
                state = ta.step(state, label)
            assert reward == int(state in ta.accepting)


def test_simulation_is_reproducible(lumping):
    mdp, ta = lumping
    assert conftest.simulate(mdp, ta, 10, 20, seed=1) == conftest.simulate(mdp, ta, 10, 20, seed=1)
    assert conftest.simulate(mdp, ta, 10, 20, seed=1) != conftest.simulate(mdp, ta, 10, 20, seed=2)
    # episode i does not depend on how many episodes were requested
    assert conftest.simulate(mdp, ta, 10, 20, seed=1)[:5] == conftest.simulate(mdp, ta, 10, 5, seed=1)


def test_simulation_parallel(lumping):
    mdp, ta = lumping
    policy = mdp_env.uniform_random_policy(mdp)
    serial = mdp_env.simulate_episodes(mdp, ta, policy, 8, 12, 0, n_jobs=1)
    parallel = mdp_env.simulate_episodes(mdp, ta, policy, 8, 12, 0, n_jobs=2)
    assert serial == parallel


def test_accepting_initial_state(lumping):
    mdp, _ = lumping
    ta = automata.TaskAutomaton(['q'], 'q', mdp.label_set(), {('q', label): 'q' for label in mdp.label_set()}, ['q'])
    for episode in conftest.simulate(mdp, ta, 5, 5):
        assert episode.rewards == (1,) * 6


def test_incomplete_hidden_automaton(lumping):
    mdp, _ = lumping
    ta = automata.TaskAutomaton(['q'], 'q', mdp.label_set(), {('q', automata.EMPTY): 'q'}, [])
    with pytest.raises(mdp_env.SimulationError):
        conftest.simulate(mdp, ta, 5, 5)


def test_simulation_arguments(lumping):
    mdp, ta = lumping
    assert conftest.simulate(mdp, ta, 5, 0) == []
    with pytest.raises(ValueError):
        conftest.simulate(mdp, ta, 0, 5)


def test_reward_fraction():
    mdp = worlds.gridworld('grid3')
    ta = worlds.task_automaton('coffee_stairs', mdp.label_set())
    fraction = mdp_env.reward_fraction(conftest.simulate(mdp, ta, 34, 275))
    assert 0.1 < fraction < 0.6
    assert mdp_env.reward_fraction([]) == 0.


def test_count_trajectories():
    mdp = mdp_env.build_gridworld(2, 1, {})
    chain = mdp_env.induced_chain(mdp, mdp_env.uniform_random_policy(mdp))
    # every state has two successors
    assert mdp_env.count_trajectories(chain, 0, 3) == 1 + 2 + 4 + 8
