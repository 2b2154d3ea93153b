"""Cone Lumping: determinising the NFA underlying a product chain in polynomial time.

The NFA extracted from a product chain has the property that every edge into a state carries that state's label. As
the task automaton is deterministic, all successors of a product state sharing a label must correspond to the same
automaton state, so they can be lumped together. Repeating this at the level of classes until nothing changes gives
a deterministic quotient.
"""
import dataclasses
import logging

from . import _unionfind
from . import automata
from . import hmm_learner
from . import product_model


_log = logging.getLogger(__name__)


class StructuralError(RuntimeError):
    """Raised when an NFA cannot underlie the product of an MDP with a deterministic task automaton.

    This signals a structurally incorrect (learned) digraph; retraining or a different threshold may help.
    """


@dataclasses.dataclass(frozen=True)
class LumpPartition:
    """The classes found by Cone Lumping.

    Attributes:
        class_of: Mapping from NFA state to class id. Class ids are 0, 1, ... ordered by their first member.
        representatives: representatives[c] is the first member (in NFA state order) of class c.
        iterations: Number of passes over the classes, the last of which changed nothing.
        check_operations: Number of merge checks performed.
    """
    class_of: dict
    representatives: list
    iterations: int
    check_operations: int

    @property
    def num_classes(self):
        return len(self.representatives)

    def members(self, class_id):
        return [state for state, other in self.class_of.items() if other == class_id]


def lump(nfa):
    """Runs Cone Lumping to a fixpoint and returns the LumpPartition."""
    labels = automata.sort_labels(nfa.alphabet)
    order = {state: index for index, state in enumerate(nfa.states)}
    union_find = _unionfind.UnionFind(nfa.states)
    iterations = 0
    check_operations = 0
    changed = True
    while changed:
        changed = False
        iterations += 1
        for members in union_find.classes():
            for label in labels:
                targets = set()
                for state in members:
                    targets.update(nfa.successors(state, label))
                if len(targets) < 2:
                    continue
                targets = sorted(targets, key=order.__getitem__)
                for target in targets[1:]:
                    check_operations += 1
                    if union_find.union(targets[0], target):
                        changed = True
        _log.debug("Cone Lumping pass %d: %d classes.", iterations, union_find.num_sets)

    classes = union_find.classes()
    class_of = {state: class_id for class_id, members in enumerate(classes) for state in members}
    return LumpPartition(class_of, [members[0] for members in classes], iterations, check_operations)


def quotient(nfa, partition):
    """The deterministic quotient of `nfa` by a Cone Lumping partition.

    A class is accepting iff its members are; a class mixing accepting and non-accepting states, or with two
    successor classes on one label, raises StructuralError.
    """
    transitions = {}
    for source, label, target in nfa.edges():
        key = (partition.class_of[source], label)
        target_class = partition.class_of[target]
        if transitions.setdefault(key, target_class) != target_class:
            raise StructuralError("Class {} has several successors on label {!r} after lumping."
                                  "".format(key[0], automata.format_label(label)))
    accepting = []
    for class_id in range(partition.num_classes):
        flags = {state in nfa.accepting for state in partition.members(class_id)}
        if len(flags) > 1:
            raise StructuralError("Class {} (states {}) mixes accepting and non-accepting states; the digraph cannot "
                                  "underlie a product with a deterministic task automaton."
                                  "".format(class_id, partition.members(class_id)))
        if True in flags:
            accepting.append(class_id)
    return automata.TaskAutomaton(range(partition.num_classes), partition.class_of[nfa.initial], nfa.alphabet,
                                  transitions, accepting)


def cone_lump(nfa):
    """Determinises a product NFA by Cone Lumping. Returns a (possibly partial) TaskAutomaton."""
    partition = lump(nfa)
    ta = quotient(nfa, partition)
    _log.info("Cone Lumping reduced %d NFA states to %d classes in %d passes (%d merge checks).",
              len(nfa.states), partition.num_classes, partition.iterations, partition.check_operations)
    return ta


def lump_complexity_probe(nfa):
    """The number of merge checks Cone Lumping performs on `nfa`."""
    return lump(nfa).check_operations


def distill_chain(chain, threshold=0.):
    """Extracts the NFA of a ProductChain, lumps it, and completes the result with self-loops."""
    nfa = product_model.extract_nfa(chain, threshold)
    return automata.complete(cone_lump(nfa), policy='loop')


def distill_ta(learned, mdp_labels, threshold=0.01):
    """Distils a task automaton from learned HMM parameters.

    Arguments:
        learned: HmmParams whose hidden state i observes MDP state i mod |S|.
        mdp_labels: The label of each MDP state.
        threshold: Transition probabilities at or below this are treated as zero.

    Returns:
        A complete TaskAutomaton over the labels used by the MDP.
    """
    return distill_chain(hmm_learner.learned_chain(learned, mdp_labels), threshold)
