import numpy as np
import pytest

from tasklearn import automata
from tasklearn import mdp_env
from tasklearn import product_model
from tasklearn import worlds

import conftest


coffee = automata.make_label('coffee')
stairs = automata.make_label('stairs')


def test_build_product(lumping):
    mdp, ta = lumping
    product = product_model.build_product(mdp, ta)
    assert product.num_states == 27
    assert product.initial == 0
    assert product.pair(11) == (2, 'q1')
    assert product.index(2, 'q1') == 11
    assert product.accepting.tolist() == [False] * 18 + [True] * 9
    assert (product.per_action_transition.sum(axis=2) == 1).all()
    # moving right from <s1, q0> enters a coffee cell and advances the automaton
    assert product.successors[mdp.actions.index('right'), 1] == 11
    assert product.reward(11) == 0
    assert product.reward(product.index(6, 'q2')) == 1


def test_build_product_incomplete(lumping):
    mdp, _ = lumping
    ta = automata.TaskAutomaton(['q'], 'q', mdp.label_set(), {('q', automata.EMPTY): 'q'}, [])
    with pytest.raises(ValueError):
        product_model.build_product(mdp, ta)


def test_induce_chain(lumping):
    mdp, ta = lumping
    chain = conftest.ground_truth_chain(mdp, ta)
    assert chain.num_states == 27
    assert chain.num_mdp_states == 9
    assert np.allclose(chain.transition.sum(axis=1), 1, rtol=0, atol=1e-12)
    assert chain.state_names()[11] == 's2q1'
    assert product_model.observe(chain, 11) == (2, 0)
    assert product_model.observe(chain, 24, mode='label') == (stairs, 1)


def test_chain_validation():
    with pytest.raises(ValueError):
        product_model.ProductChain([[0.5, 0.4], [0., 1.]], 0, [False, True], [0, 1], ['.', '.'])
    with pytest.raises(ValueError):
        product_model.ProductChain([[1., 0.], [0., 1.]], 2, [False, True], [0, 1], ['.', '.'])


def test_extract_nfa_cones(lumping):
    mdp, ta = lumping
    nfa = product_model.extract_nfa(conftest.ground_truth_chain(mdp, ta))
    assert not nfa.is_deterministic()
    assert nfa.successors(0, automata.EMPTY) == {0, 1, 3}
    assert nfa.successors(11, coffee) == {11, 14}
    for source, label, target in nfa.edges():
        assert label == mdp.labels[target % mdp.num_states]
    # <s2, q0> cannot be reached: entering a coffee cell moves the automaton on
    assert 2 not in nfa.states
    assert nfa.accepting == {state for state in nfa.states if state >= 18}


def test_recover_mdp_probabilities(lumping):
    mdp, ta = lumping
    recovered = product_model.recover_mdp_probabilities(conftest.ground_truth_chain(mdp, ta))
    expected = mdp_env.induced_chain(mdp, mdp_env.uniform_random_policy(mdp))
    assert np.allclose(recovered, expected, rtol=0, atol=1e-12)


def test_recover_mdp_action_probabilities(lumping):
    mdp, ta = lumping
    recovered = product_model.recover_mdp_action_probabilities(product_model.build_product(mdp, ta))
    for action in range(len(mdp.actions)):
        expected = np.zeros((mdp.num_states, mdp.num_states))
        expected[np.arange(mdp.num_states), mdp.successors[action]] = 1.
        assert np.array_equal(recovered[action], expected)


def test_recover_inconsistent_chain():
    # <s0, q0> moves to s1 but <s0, q1> stays in s0
    transition = [[0., 1., 0., 0.],
                  [0., 0., 1., 0.],
                  [0., 0., 1., 0.],
                  [0., 0., 0., 1.]]
    chain = product_model.ProductChain(transition, 0, [False] * 4, [0, 1, 0, 1], ['.'] * 4)
    with pytest.raises(product_model.InconsistentChainError):
        product_model.recover_mdp_probabilities(chain)


def test_observational_equivalence(library):
    mdp, book, carpet_book = library
    p1 = conftest.ground_truth_chain(mdp, book)
    p2 = conftest.ground_truth_chain(mdp, carpet_book)
    assert product_model.observationally_equivalent(p1, p2, horizon=5)
    assert product_model.observationally_equivalent(p1, p2, horizon=5, mode='label')
    m1 = product_model.build_product(mdp, book)
    m2 = product_model.build_product(mdp, carpet_book)
    assert product_model.observationally_equivalent_mdp(m1, m2, horizon=4)


def _with_redundant_copy(ta):
    # a fresh initial state that behaves exactly like the old one
    transitions = dict(ta.transitions)
    transitions.update({('copy', label): ta.step(ta.initial, label) for label in ta.alphabet})
    accepting = set(ta.accepting) | ({'copy'} if ta.initial in ta.accepting else set())
    return automata.TaskAutomaton(['copy'] + list(ta.states), 'copy', ta.alphabet, transitions, accepting)


def test_language_equal_automata_are_observationally_equivalent(lumping):
    mdp, ta = lumping
    copy = _with_redundant_copy(ta)
    assert copy != ta
    assert automata.language_equivalent(copy, ta)
    p1 = conftest.ground_truth_chain(mdp, ta)
    p2 = conftest.ground_truth_chain(mdp, copy)
    assert p2.num_states == p1.num_states + mdp.num_states
    assert product_model.observationally_equivalent(p1, p2, horizon=5)
    assert product_model.observationally_equivalent(p2, p1, horizon=5, mode='label')


def test_observational_difference(lumping):
    mdp, ta = lumping
    stairs_only = worlds.sequence_task(['stairs'], mdp.label_set())
    p1 = conftest.ground_truth_chain(mdp, ta)
    p2 = conftest.ground_truth_chain(mdp, stairs_only)
    assert product_model.observationally_equivalent(p1, p2, horizon=1)
    assert not product_model.observationally_equivalent(p1, p2, horizon=3)
    assert not product_model.observationally_equivalent_mdp(product_model.build_product(mdp, ta),
                                                            product_model.build_product(mdp, stairs_only), horizon=3)


def test_observational_equivalence_size_limit(lumping):
    mdp, ta = lumping
    chain = conftest.ground_truth_chain(mdp, ta)
    with pytest.raises(ValueError):
        product_model.observationally_equivalent(chain, chain, horizon=2, max_states=10)


def test_mdp_restricted_ta():
    mdp = mdp_env.build_gridworld(2, 1, {(0, 1): 'x'})
    x = automata.make_label('x')
    y = automata.make_label('y')
    # the y transition can never be triggered in this grid
    ta = automata.TaskAutomaton(['q0', 'q1', 'q2'], 'q0', {automata.EMPTY, x, y},
                                {('q0', automata.EMPTY): 'q0', ('q0', x): 'q1', ('q0', y): 'q2',
                                 ('q1', automata.EMPTY): 'q1', ('q1', x): 'q1',
                                 ('q2', automata.EMPTY): 'q2', ('q2', x): 'q2'}, ['q1'])
    restricted = product_model.mdp_restricted_ta(mdp, ta)
    assert restricted.states == ('q0', 'q1')
    assert restricted.accepting == {'q1'}
    assert restricted.step('q0', y) is None
    assert restricted.step('q0', x) == 'q1'


def test_attainable_traces(library):
    mdp, _, _ = library
    book = automata.make_label('book')
    carpet = automata.make_label('carpet')
    within = product_model.attainable_trace_automaton(product_model.mdp_nfa(mdp))
    assert automata.run(within, [book])[0] is None
    assert automata.run(within, [automata.EMPTY, automata.EMPTY, carpet, book, carpet])[0] is not None
    assert automata.run(within, [carpet, automata.EMPTY, book])[0] is None


def test_count_product_trajectories(lumping):
    mdp, ta = lumping
    chain = conftest.ground_truth_chain(mdp, ta)
    grid_chain = mdp_env.induced_chain(mdp, mdp_env.uniform_random_policy(mdp))
    # the automaton is deterministic, so product paths and grid paths correspond one to one
    for length in range(5):
        assert product_model.count_product_trajectories(chain, length) == \
            mdp_env.count_trajectories(grid_chain, mdp.initial_state, length)
