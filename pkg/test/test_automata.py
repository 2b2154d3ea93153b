import numpy as np
import pytest

from tasklearn import automata


x = automata.make_label('x')
y = automata.make_label('y')
EMPTY = automata.EMPTY


def _dfa(transitions, initial, accepting, alphabet=(x, y)):
    states = []
    for (source, _), target in transitions.items():
        for state in (source, target):
            if state not in states:
                states.append(state)
    return automata.TaskAutomaton(states, initial, alphabet, transitions, accepting)


def test_labels():
    assert automata.format_label(EMPTY) == '.'
    assert automata.parse_label('.') == EMPTY
    assert automata.parse_label('tv+coffee') == frozenset({'coffee', 'tv'})
    assert automata.format_label(automata.make_label('tv', 'coffee')) == 'coffee+tv'
    assert automata.sort_labels([automata.make_label('b', 'a'), y, EMPTY, x]) == [EMPTY, x, y,
                                                                                  automata.make_label('a', 'b')]
    with pytest.raises(ValueError):
        automata.parse_label('coffee+')


def test_run_partial():
    ta = _dfa({('a', x): 'b'}, 'a', ['b'])
    assert automata.run(ta, [x]) == ('b', True)
    assert automata.run(ta, [x, x]) == (None, False)
    assert automata.run(ta, []) == ('a', False)
    with pytest.raises(ValueError):
        automata.run(ta, [automata.make_label('z')])


@pytest.mark.parametrize('policy', ['loop', 'sink'])
def test_complete(policy):
    ta = _dfa({('a', x): 'b'}, 'a', ['b'])
    completed = automata.complete(ta, policy=policy)
    assert completed.is_complete()
    assert completed.step('a', x) == 'b'
    if policy == 'loop':
        assert completed.states == ('a', 'b')
        assert completed.step('b', x) == 'b'
        assert automata.run(completed, [x, y, x]) == ('b', True)
    else:
        assert automata.SINK in completed.states
        assert completed.step('b', x) == automata.SINK
        assert automata.run(completed, [x, y]) == (automata.SINK, False)


def test_complete_extends_alphabet():
    ta = _dfa({('a', x): 'b'}, 'a', ['b'], alphabet=(x,))
    completed = automata.complete(ta, alphabet=[y])
    assert completed.alphabet == {x, y}
    assert completed.step('a', y) == 'a'


def test_subset_construction():
    # words over {x, y} whose second-to-last letter is x
    nfa = automata.Nfa([0, 1, 2], 0, {x, y}, {(0, x): {0, 1}, (0, y): {0}, (1, x): {2}, (1, y): {2}}, [2])
    dfa = automata.subset_construction(nfa)
    assert frozenset() not in dfa.states
    assert len(dfa.states) == 4
    for word in automata.enumerate_words({x, y}, 6):
        assert automata.run(dfa, word)[1] == nfa.accepts(word) == (len(word) >= 2 and word[-2] == x)


def test_subset_construction_keeps_dead_words_undefined():
    nfa = automata.Nfa([0, 1], 0, {x, y}, {(0, x): {1}}, [1])
    dfa = automata.subset_construction(nfa)
    assert automata.run(dfa, [y]) == (None, False)
    assert automata.run(dfa, [x]) == (frozenset({1}), True)


def test_minimize_1():
    d = _dfa({('A', x): 'B', ('A', y): 'C',
              ('B', x): 'B', ('B', y): 'D',
              ('C', x): 'B', ('C', y): 'C',
              ('D', x): 'B', ('D', y): 'E',
              ('E', x): 'B', ('E', y): 'C'}, 'A', ['E'])
    m = automata.minimize(d)

    assert m.states == (0, 1, 2, 3)
    assert m.initial == 0
    assert m.accepting == {3}
    assert m.transitions == {(0, x): 1, (0, y): 0,
                             (1, x): 1, (1, y): 2,
                             (2, x): 1, (2, y): 3,
                             (3, x): 1, (3, y): 0}


def test_minimize_2():
    d = _dfa({('A', x): 'B', ('A', y): 'F',
              ('B', x): 'G', ('B', y): 'C',
              ('C', x): 'A', ('C', y): 'C',
              ('D', x): 'C', ('D', y): 'G',
              ('E', x): 'H', ('E', y): 'F',
              ('F', x): 'C', ('F', y): 'G',
              ('G', x): 'G', ('G', y): 'E',
              ('H', x): 'G', ('H', y): 'C'}, 'A', ['C'])
    m = automata.minimize(d)

    assert len(m.states) == 5
    assert len(m.accepting) == 1
    assert automata.language_equivalent(m, d)


def test_minimize_3():
    d = _dfa({('A', x): 'B', ('A', y): 'C',
              ('B', x): 'D', ('B', y): 'E',
              ('C', x): 'E', ('C', y): 'D',
              ('D', x): 'F', ('D', y): 'F',
              ('E', x): 'F', ('E', y): 'F',
              ('F', x): 'F', ('F', y): 'F'}, 'A', ['B', 'C', 'F'])
    m = automata.minimize(d)

    assert m.accepting == {1, 3}
    assert m.transitions == {(0, x): 1, (0, y): 1,
                             (1, x): 2, (1, y): 2,
                             (2, x): 3, (2, y): 3,
                             (3, x): 3, (3, y): 3}


def test_minimize_is_canonical():
    a = _dfa({('p', x): 'q', ('p', y): 'p', ('q', x): 'q', ('q', y): 'q'}, 'p', ['q'])
    # the same language with a redundant copy of p and differently named states
    b = _dfa({(10, x): 30, (10, y): 20, (20, x): 30, (20, y): 10, (30, x): 30, (30, y): 30}, 10, [30])
    assert automata.minimize(a) == automata.minimize(b)
    assert automata.minimize(automata.minimize(a)) == automata.minimize(a)


def test_minimize_requires_complete():
    with pytest.raises(ValueError):
        automata.minimize(_dfa({('a', x): 'b'}, 'a', ['b']))


def test_find_counterexample_is_shortest():
    a = _dfa({('a', x): 'b', ('a', y): 'a', ('b', x): 'b', ('b', y): 'b'}, 'a', ['b'])
    b = _dfa({('a', x): 'a', ('a', y): 'b', ('b', x): 'c', ('b', y): 'b', ('c', x): 'c', ('c', y): 'c'}, 'a', ['c'])
    assert automata.find_counterexample(a, a) is None
    assert automata.find_counterexample(a, b) == (x,)


def test_find_counterexample_within():
    a = _dfa({('a', x): 'b', ('a', y): 'a', ('b', x): 'b', ('b', y): 'b'}, 'a', ['b'])
    # words starting with x
    b = _dfa({('a', x): 'b', ('a', y): 'c', ('b', x): 'b', ('b', y): 'b', ('c', x): 'c', ('c', y): 'c'}, 'a', ['b'])
    assert automata.find_counterexample(a, b) == (y, x)
    within = _dfa({('s', x): 't', ('t', x): 't', ('t', y): 't'}, 's', [])
    assert automata.find_counterexample(a, b, within=within) is None


def test_find_counterexample_alphabet_mismatch():
    a = _dfa({('a', x): 'a'}, 'a', [], alphabet=(x,))
    b = _dfa({('a', x): 'a', ('a', y): 'a'}, 'a', [])
    with pytest.raises(ValueError):
        automata.find_counterexample(a, b)


def test_enumerate_words():
    words = list(automata.enumerate_words({x, y}, 2))
    assert len(words) == 1 + 2 + 4
    assert words[0] == ()
    assert words[1:3] == [(x,), (y,)]


def test_reachable_states():
    ta = _dfa({('a', x): 'b', ('c', x): 'a'}, 'a', [])
    assert automata.reachable_states(ta) == ['a', 'b']


def test_invalid_automata():
    with pytest.raises(ValueError):
        automata.TaskAutomaton(['a'], 'b', {x}, {}, [])
    with pytest.raises(ValueError):
        automata.TaskAutomaton(['a'], 'a', {x}, {('a', y): 'a'}, [])
    with pytest.raises(ValueError):
        automata.Nfa(['a'], 'a', {x}, {('a', x): {'b'}}, [])


def _random_nfa(seed, num_states=8):
    rng = np.random.default_rng(seed)
    states = list(range(num_states))
    transitions = {(state, label): {target for target in states if rng.random() < 0.25}
                   for state in states for label in (x, y)}
    accepting = [state for state in states if rng.random() < 0.3]
    return automata.Nfa(states, 0, {x, y}, transitions, accepting)


def _random_dfa(seed, max_states=4):
    rng = np.random.default_rng(seed)
    states = list(range(int(rng.integers(1, max_states + 1))))
    transitions = {(state, label): int(rng.choice(states)) for state in states for label in (x, y)}
    accepting = [state for state in states if rng.random() < 0.5]
    return automata.TaskAutomaton(states, 0, {x, y}, transitions, accepting)


def _renamed(dfa):
    names = {state: 'r{}'.format(state) for state in dfa.states}
    return automata.TaskAutomaton([names[state] for state in reversed(dfa.states)], names[dfa.initial], dfa.alphabet,
                                  {(names[source], label): names[target]
                                   for (source, label), target in dfa.transitions.items()},
                                  [names[state] for state in dfa.accepting])


@pytest.mark.parametrize('seed', range(10))
def test_subset_construction_accepts_what_the_nfa_accepts(seed):
    nfa = _random_nfa(seed)
    dfa = automata.subset_construction(nfa)
    for word in automata.enumerate_words({x, y}, 6):
        assert automata.run(dfa, word)[1] == nfa.accepts(word), word


def test_language_equivalence_is_an_equivalence():
    dfas = [_random_dfa(seed) for seed in range(12)]
    for dfa in dfas[:4]:
        dfas.extend([_renamed(dfa), automata.minimize(dfa)])
    # with at most four states each, two of these automata that differ do so on a word of length at most six
    words = list(automata.enumerate_words({x, y}, 6))
    languages = [tuple(automata.run(dfa, word)[1] for word in words) for dfa in dfas]
    equal = [[automata.language_equivalent(a, b) for b in dfas] for a in dfas]
    for i in range(len(dfas)):
        assert equal[i][i]
        for j in range(len(dfas)):
            assert equal[i][j] == equal[j][i] == (languages[i] == languages[j])
            for k in range(len(dfas)):
                if equal[i][j] and equal[j][k]:
                    assert equal[i][k]
    assert equal[0][12] and equal[12][13] and equal[0][13]


@pytest.mark.parametrize('seed', range(10))
def test_minimize_is_idempotent(seed):
    dfa = _random_dfa(seed, max_states=6)
    minimal = automata.minimize(dfa)
    assert automata.minimize(minimal) == minimal
    assert automata.minimize(_renamed(dfa)) == minimal
    assert automata.language_equivalent(minimal, dfa)
    assert len(minimal.states) <= len(automata.reachable_states(dfa))
