"""Removing environmentally biased labels from a distilled task automaton.

A label is environmentally biased when the agent has to cross it to reach the labels the task is really about, so the
data cannot tell the two apart. Each label in turn is guessed to be irrelevant: the states joined by that label are
merged, and the guess is kept if the merged automaton still explains every training episode.
"""
import collections as co
import dataclasses
import logging

from . import _unionfind
from . import automata


_log = logging.getLogger(__name__)


class InconsistentAutomatonError(ValueError):
    """Raised when a task automaton does not reproduce the rewards of the training episodes."""


def first_inconsistency(ta, episodes):
    """The first (episode_index, step) at which `ta` disagrees with the observed reward, or None.

    The automaton starts in its initial state at step 0 and reads trace[t] to reach step t. An undefined transition
    leads to a rejecting dead state.
    """
    for index, episode in enumerate(episodes):
        state = ta.initial
        for t, (label, reward) in enumerate(zip(episode.trace, episode.rewards)):
            if t > 0:
                state = ta.step(state, label)
            if (state in ta.accepting) != bool(reward):
                return index, t
    return None


def is_consistent(ta, episodes):
    """Whether `ta` is accepting after exactly the prefixes at which the episodes are rewarded."""
    return first_inconsistency(ta, episodes) is None


def _congruence(ta, union_find):
    # joins classes with distinct non-loop successors on the same label, until the quotient is deterministic
    labels = automata.sort_labels(ta.alphabet)
    changed = True
    while changed:
        changed = False
        for members in union_find.classes():
            for label in labels:
                targets = {union_find.find(target) for target in (ta.step(state, label) for state in members)
                           if target is not None}
                targets.discard(union_find.find(members[0]))
                targets = sorted(targets, key=ta.states.index)
                for target in targets[1:]:
                    if union_find.union(targets[0], target):
                        changed = True


def merge_on_label(ta, label):
    """Merges every pair of states joined by a non-loop `label` edge.

    In the quotient a non-loop edge of any member overrides the self-loops of the other members; classes that would
    still have two different successors on some label are merged too. `label` therefore self-loops everywhere in the
    result. A class is accepting iff one of its members is.

    Returns:
        A complete TaskAutomaton whose states are 0, 1, ... in order of their first member.
    """
    if label not in ta.alphabet:
        raise ValueError("Label {!r} is not in the alphabet.".format(automata.format_label(label)))
    ta = automata.complete(ta, policy='loop')
    union_find = _unionfind.UnionFind(ta.states)
    for state in ta.states:
        union_find.union(state, ta.step(state, label))
    _congruence(ta, union_find)

    classes = union_find.classes()
    class_of = {state: class_id for class_id, members in enumerate(classes) for state in members}
    transitions = {}
    for class_id, members in enumerate(classes):
        for symbol in ta.alphabet:
            targets = {class_of[ta.step(state, symbol)] for state in members} - {class_id}
            transitions[class_id, symbol] = targets.pop() if targets else class_id
    accepting = [class_id for class_id, members in enumerate(classes) if any(state in ta.accepting
                                                                             for state in members)]
    return automata.TaskAutomaton(range(len(classes)), class_of[ta.initial], ta.alphabet, transitions, accepting)


def debias_label_order(ta, episodes):
    """Labels in the order they are tried: least frequent in the training traces first, ties by name."""
    counts = co.Counter(label for episode in episodes for label in episode.trace)
    return sorted(ta.alphabet, key=lambda label: (counts[label], automata.format_label(label)))


@dataclasses.dataclass(frozen=True)
class DebiasReport:
    """The outcome of de-biasing.

    Attributes:
        automaton: The de-biased, minimised TaskAutomaton.
        removed_labels: Labels found to be irrelevant, in the order they were removed.
        kept_labels: Labels still labelling a non-loop transition of `automaton`.
        states_before: Number of states of the minimised input.
        states_after: Number of states of `automaton`.
        passes: Number of passes over the labels.
    """
    automaton: automata.TaskAutomaton
    removed_labels: tuple
    kept_labels: tuple
    states_before: int
    states_after: int
    passes: int

    def as_dict(self):
        return co.OrderedDict([('removed_labels', ' '.join(map(automata.format_label, self.removed_labels)) or '-'),
                               ('kept_labels', ' '.join(map(automata.format_label, self.kept_labels)) or '-'),
                               ('states_before', self.states_before),
                               ('states_after', self.states_after),
                               ('passes', self.passes)])


def remove_environmental_bias_report(ta, episodes, label_order=None):
    """De-biases `ta` against `episodes` and reports what was removed.

    Each label still labelling a non-loop transition is tentatively merged away (see `merge_on_label`); the merge is
    kept iff the result is still consistent with every episode. Passes over the labels are repeated until one of them
    keeps no merge, so the output is a fixpoint. The result is minimised.

    Arguments:
        ta: A TaskAutomaton consistent with `episodes`. Missing transitions are read as self-loops.
        episodes: The training episodes.
        label_order: Optional explicit order in which labels are tried. Defaults to `debias_label_order`.

    Returns:
        A DebiasReport.
    """
    current = automata.minimize(automata.complete(ta, policy='loop'))
    inconsistency = first_inconsistency(current, episodes)
    if inconsistency is not None:
        raise InconsistentAutomatonError("The automaton disagrees with the reward of episode {} at step {}; only "
                                         "consistent automata can be de-biased.".format(*inconsistency))
    states_before = len(current.states)
    order = debias_label_order(current, episodes) if label_order is None else list(label_order)

    removed = []
    passes = 0
    changed = True
    while changed:
        changed = False
        passes += 1
        for label in order:
            if label not in current.labels_in_use():
                continue
            candidate = automata.minimize(merge_on_label(current, label))
            if is_consistent(candidate, episodes):
                _log.info("Removed label %r: %d -> %d states.", automata.format_label(label), len(current.states),
                          len(candidate.states))
                current = candidate
                removed.append(label)
                changed = True
            else:
                _log.debug("Label %r is needed.", automata.format_label(label))

    kept = tuple(automata.sort_labels(current.labels_in_use()))
    return DebiasReport(current, tuple(removed), kept, states_before, len(current.states), passes)


def remove_environmental_bias(ta, episodes, label_order=None):
    """De-biases and minimises `ta`; see `remove_environmental_bias_report`."""
    return remove_environmental_bias_report(ta, episodes, label_order).automaton
