"""Finite automata over label alphabets, and the classical algorithms on them.

Labels are elements of 2^AP, represented as frozensets of proposition names, so that two labels built separately
compare by value. Automata may be partial: an undefined transition leads to a dead state, and `complete` applies the
self-loop convention (a missing label means "stay where you are").
"""
import collections as co
import dataclasses
import logging


_log = logging.getLogger(__name__)

EMPTY = frozenset()
SINK = 'sink'


def make_label(*propositions):
    """Builds the label made of the given atomic propositions. `make_label()` is the empty label."""
    return frozenset(propositions)


def format_label(label):
    """The single-token name of a label: '.' for the empty label, otherwise proposition names joined by '+'."""
    if not label:
        return '.'
    return '+'.join(sorted(label))


def parse_label(token):
    if token in ('.', '∅', '{}'):
        return EMPTY
    propositions = token.split('+')
    if any(not proposition for proposition in propositions):
        raise ValueError("Malformed label token {!r}.".format(token))
    return frozenset(propositions)


def sort_labels(labels):
    """Canonical label order: the empty label first, then by number of propositions, then by name."""
    return sorted(labels, key=lambda label: (len(label), format_label(label)))


@dataclasses.dataclass(frozen=True)
class Nfa:
    """A nondeterministic finite automaton.

    `transitions` maps (state, label) pairs to frozensets of target states. Missing keys mean no transition. States
    may be any hashable values; `states` fixes their order.
    """
    states: tuple
    initial: object
    alphabet: frozenset
    transitions: dict
    accepting: frozenset

    def __post_init__(self):
        object.__setattr__(self, 'states', tuple(self.states))
        object.__setattr__(self, 'alphabet', frozenset(self.alphabet))
        object.__setattr__(self, 'accepting', frozenset(self.accepting))
        transitions = {key: frozenset(targets) for key, targets in self.transitions.items() if targets}
        object.__setattr__(self, 'transitions', transitions)

        state_set = set(self.states)
        if len(state_set) != len(self.states):
            raise ValueError("Duplicate states in automaton.")
        if self.initial not in state_set:
            raise ValueError("Initial state {!r} is not a state of the automaton.".format(self.initial))
        if not self.accepting <= state_set:
            raise ValueError("Accepting states {!r} are not states of the automaton."
                             "".format(set(self.accepting - state_set)))
        for (source, label), targets in transitions.items():
            if source not in state_set:
                raise ValueError("Transition from unknown state {!r}.".format(source))
            if label not in self.alphabet:
                raise ValueError("Transition on label {!r} outside the alphabet.".format(format_label(label)))
            if not targets <= state_set:
                raise ValueError("Transition to unknown states {!r}.".format(set(targets - state_set)))

    def successors(self, state, label):
        return self.transitions.get((state, label), EMPTY)

    def edges(self):
        """Yields every (source, label, target) triple, in state order and canonical label order."""
        order = {state: index for index, state in enumerate(self.states)}
        for source in self.states:
            for label in sort_labels(self.alphabet):
                for target in sorted(self.successors(source, label), key=order.__getitem__):
                    yield source, label, target

    def accepts(self, word):
        current = {self.initial}
        for symbol in word:
            if symbol not in self.alphabet:
                raise ValueError("Symbol {!r} is not in the alphabet.".format(format_label(symbol)))
            current = set().union(*(self.successors(state, symbol) for state in current))
            if not current:
                return False
        return bool(current & self.accepting)

    def is_deterministic(self):
        return all(len(targets) <= 1 for targets in self.transitions.values())


@dataclasses.dataclass(frozen=True)
class TaskAutomaton:
    """A deterministic finite automaton over labels: a task automaton.

    `transitions` maps (state, label) pairs to a single target state. The automaton may be partial.
    """
    states: tuple
    initial: object
    alphabet: frozenset
    transitions: dict
    accepting: frozenset

    def __post_init__(self):
        object.__setattr__(self, 'states', tuple(self.states))
        object.__setattr__(self, 'alphabet', frozenset(self.alphabet))
        object.__setattr__(self, 'accepting', frozenset(self.accepting))
        object.__setattr__(self, 'transitions', dict(self.transitions))

        state_set = set(self.states)
        if len(state_set) != len(self.states):
            raise ValueError("Duplicate states in automaton.")
        if self.initial not in state_set:
            raise ValueError("Initial state {!r} is not a state of the automaton.".format(self.initial))
        if not self.accepting <= state_set:
            raise ValueError("Accepting states {!r} are not states of the automaton."
                             "".format(set(self.accepting - state_set)))
        for (source, label), target in self.transitions.items():
            if source not in state_set or target not in state_set:
                raise ValueError("Transition {!r} -> {!r} mentions an unknown state.".format(source, target))
            if label not in self.alphabet:
                raise ValueError("Transition on label {!r} outside the alphabet.".format(format_label(label)))

    def step(self, state, label):
        """The successor of `state` on `label`, or None if the transition is undefined (or `state` is dead)."""
        if state is None:
            return None
        return self.transitions.get((state, label))

    def is_complete(self):
        return all((state, label) in self.transitions for state in self.states for label in self.alphabet)

    def edges(self):
        for source in self.states:
            for label in sort_labels(self.alphabet):
                target = self.transitions.get((source, label))
                if target is not None:
                    yield source, label, target

    def labels_in_use(self):
        """Labels labelling at least one non-loop transition."""
        return frozenset(label for source, label, target in self.edges() if source != target)

    def as_nfa(self):
        return Nfa(self.states, self.initial, self.alphabet,
                   {key: {target} for key, target in self.transitions.items()}, self.accepting)


def run(dfa, word):
    """Runs a task automaton on a word.

    Returns:
        A pair (final_state, accepted). `final_state` is None if the run hit an undefined transition, in which case
        the word is rejected.
    """
    state = dfa.initial
    for symbol in word:
        if symbol not in dfa.alphabet:
            raise ValueError("Symbol {!r} is not in the alphabet.".format(format_label(symbol)))
        state = dfa.step(state, symbol)
        if state is None:
            return None, False
    return state, state in dfa.accepting


def complete(automaton, policy='loop', alphabet=None):
    """Makes the transition function total.

    Arguments:
        automaton: A TaskAutomaton or Nfa.
        policy: 'loop' (default) sends every missing transition back to its source state, which is the convention
            used when drawing task automata. 'sink' sends missing transitions to a fresh rejecting sink state.
        alphabet: Optionally extend the alphabet before completing.

    Returns:
        An automaton of the same kind, with a total transition function.
    """
    if policy not in ('loop', 'sink'):
        raise ValueError("Valid values for 'policy' are 'loop' and 'sink'.")
    alphabet = automaton.alphabet if alphabet is None else automaton.alphabet | frozenset(alphabet)
    is_dfa = isinstance(automaton, TaskAutomaton)

    states = list(automaton.states)
    transitions = dict(automaton.transitions)
    missing = [(state, label) for state in automaton.states for label in sort_labels(alphabet)
               if (state, label) not in transitions]
    if not missing:
        return type(automaton)(states, automaton.initial, alphabet, transitions, automaton.accepting)

    if policy == 'sink':
        if SINK in automaton.states:
            raise ValueError("Automaton already has a state called {!r}.".format(SINK))
        states.append(SINK)
        missing.extend((SINK, label) for label in sort_labels(alphabet))
    for state, label in missing:
        target = state if policy == 'loop' else SINK
        transitions[state, label] = target if is_dfa else {target}
    return type(automaton)(states, automaton.initial, alphabet, transitions, automaton.accepting)


def reachable_states(automaton):
    """States reachable from the initial state, in breadth-first order with labels taken in canonical order."""
    labels = sort_labels(automaton.alphabet)
    is_dfa = isinstance(automaton, TaskAutomaton)
    seen = {automaton.initial}
    order = [automaton.initial]
    queue = co.deque(order)
    while queue:
        state = queue.popleft()
        for label in labels:
            if is_dfa:
                target = automaton.transitions.get((state, label))
                targets = () if target is None else (target,)
            else:
                targets = sorted(automaton.successors(state, label), key=repr)
            for target in targets:
                if target not in seen:
                    seen.add(target)
                    order.append(target)
                    queue.append(target)
    return order


def subset_construction(nfa):
    """Determinises an NFA by the classic subset construction.

    Only subsets reachable from {initial} are built, with a worklist. The empty subset is never created: a word whose
    subset becomes empty has no transition in the output, so it is rejected as it is by the NFA.
    """
    labels = sort_labels(nfa.alphabet)
    start = frozenset([nfa.initial])
    states = [start]
    seen = {start}
    transitions = {}
    queue = co.deque(states)
    while queue:
        subset = queue.popleft()
        for label in labels:
            target = frozenset().union(*(nfa.successors(state, label) for state in subset))
            if not target:
                continue
            transitions[subset, label] = target
            if target not in seen:
                seen.add(target)
                states.append(target)
                queue.append(target)
    accepting = [subset for subset in states if subset & nfa.accepting]
    _log.debug("Subset construction built %d states from an NFA with %d states.", len(states), len(nfa.states))
    return TaskAutomaton(states, start, nfa.alphabet, transitions, accepting)


def minimize(dfa):
    """Minimises a complete task automaton with Hopcroft's partition refinement.

    The result is canonical: unreachable states are removed and the remaining classes are numbered 0, 1, 2, ... in
    breadth-first order from the initial state, visiting labels in canonical order. Two language-equal complete
    automata over the same alphabet therefore minimise to equal objects.
    """
    if not dfa.is_complete():
        raise ValueError("Can only minimise a complete automaton; call `complete` first.")
    labels = sort_labels(dfa.alphabet)
    states = reachable_states(dfa)

    inverse = {label: co.defaultdict(set) for label in labels}
    for state in states:
        for label in labels:
            inverse[label][dfa.transitions[state, label]].add(state)

    accepting = frozenset(state for state in states if state in dfa.accepting)
    rejecting = frozenset(states) - accepting
    partition = [block for block in (accepting, rejecting) if block]
    worklist = list(partition)
    while worklist:
        splitter = worklist.pop()
        for label in labels:
            predecessors = set()
            for state in splitter:
                predecessors.update(inverse[label].get(state, ()))
            if not predecessors:
                continue
            refined = []
            for block in partition:
                inside = block & predecessors
                outside = block - predecessors
                if inside and outside:
                    refined.extend((inside, outside))
                    if block in worklist:
                        worklist.remove(block)
                        worklist.extend((inside, outside))
                    else:
                        worklist.append(inside if len(inside) <= len(outside) else outside)
                else:
                    refined.append(block)
            partition = refined

    block_of = {state: block for block in partition for state in block}
    numbering = {block_of[dfa.initial]: 0}
    queue = co.deque([block_of[dfa.initial]])
    transitions = {}
    while queue:
        block = queue.popleft()
        representative = next(iter(block))
        for label in labels:
            target = block_of[dfa.transitions[representative, label]]
            if target not in numbering:
                numbering[target] = len(numbering)
                queue.append(target)
            transitions[numbering[block], label] = numbering[target]
    minimal_accepting = [numbering[block] for block in partition if block & accepting]
    return TaskAutomaton(range(len(numbering)), 0, dfa.alphabet, transitions, minimal_accepting)


def find_counterexample(a, b, within=None):
    """Finds a shortest word on which two task automata disagree.

    Partial automata reject words that hit an undefined transition. If `within` is given (a possibly partial
    automaton over a subset of the alphabet), only words on which `within` has a defined run are considered; this is
    how automata are compared on MDP-attainable traces only.

    Returns:
        A tuple of labels, or None if the automata agree on every considered word.
    """
    if a.alphabet != b.alphabet:
        raise ValueError("Alphabet mismatch: {} vs {}.".format(sorted(map(format_label, a.alphabet)),
                                                              sorted(map(format_label, b.alphabet))))
    labels = sort_labels(a.alphabet)
    start = (a.initial, b.initial, None if within is None else within.initial)
    parents = {start: None}
    queue = co.deque([start])
    while queue:
        node = queue.popleft()
        state_a, state_b, state_within = node
        if (state_a in a.accepting) != (state_b in b.accepting):
            word = []
            while parents[node] is not None:
                node, label = parents[node]
                word.append(label)
            return tuple(reversed(word))
        if state_a is None and state_b is None:
            continue
        for label in labels:
            if within is None:
                next_within = None
            else:
                next_within = within.step(state_within, label) if label in within.alphabet else None
                if next_within is None:
                    continue
            successor = (a.step(state_a, label), b.step(state_b, label), next_within)
            if successor not in parents:
                parents[successor] = (node, label)
                queue.append(successor)
    return None


def language_equivalent(a, b, within=None):
    """Whether two task automata accept the same language (optionally restricted to words `within` can read)."""
    return find_counterexample(a, b, within) is None


def enumerate_words(alphabet, max_length):
    """Yields every word over `alphabet` of length at most `max_length`, shortest first."""
    labels = sort_labels(alphabet)
    frontier = [()]
    for _ in range(max_length + 1):
        yield from frontier
        frontier = [word + (label,) for word in frontier for label in labels]
