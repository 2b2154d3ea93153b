"""Product MDPs and product Markov chains of a labelled MDP with a task automaton.

Product states are laid out in blocks, one block of |S| states per automaton state: the product state <s, q> has index
q_index * |S| + s. The same layout is used by the hidden states of the HMM learner, so learned and ground-truth models
can be compared index by index.
"""
import collections as co
import dataclasses
import logging
import numpy as np

from . import automata
from . import hmm_learner
from . import mdp_env


_log = logging.getLogger(__name__)

Observation = co.namedtuple('Observation', ['mdp_state', 'reward_bit'])


class InconsistentChainError(ValueError):
    """Raised when product states observing the same MDP state disagree about the MDP dynamics."""


def _check_row_stochastic(matrix, atol, what):
    if (matrix < 0).any():
        raise ValueError("{} has negative entries.".format(what))
    if not np.allclose(matrix.sum(axis=-1), 1, rtol=0, atol=atol):
        raise ValueError("{} is not row-stochastic.".format(what))


@dataclasses.dataclass(frozen=True)
class ProductModel:
    """The product MDP of a labelled MDP with a task automaton.

    Attributes:
        mdp: The LabelledMdp.
        ta: The TaskAutomaton. Its `states` order fixes the block order.
        per_action_transition: Array of shape (num_actions, N, N); row-stochastic 0/1 matrices for gridworlds.
        successors: Array of shape (num_actions, N), the deterministic successor of each product state.
        initial: Index of <s_0, q_0>.
        accepting: Boolean array of shape (N,), True on <s, q> with q accepting.
    """
    mdp: mdp_env.LabelledMdp
    ta: automata.TaskAutomaton
    per_action_transition: np.ndarray
    successors: np.ndarray
    initial: int
    accepting: np.ndarray

    @property
    def num_states(self):
        return self.accepting.shape[0]

    @property
    def state_to_mdp(self):
        return np.arange(self.num_states) % self.mdp.num_states

    @property
    def state_to_label(self):
        return tuple(self.mdp.labels[s] for s in self.state_to_mdp)

    def pair(self, index):
        """The (mdp_state, ta_state) pair of a product state."""
        q_index, s = divmod(index, self.mdp.num_states)
        return s, self.ta.states[q_index]

    def index(self, mdp_state, ta_state):
        return self.ta.states.index(ta_state) * self.mdp.num_states + mdp_state

    def reward(self, target):
        """The reward for moving into product state `target`."""
        return int(self.accepting[target])


@dataclasses.dataclass(frozen=True)
class ProductChain:
    """A product Markov chain, or any hidden chain using the block layout.

    Attributes:
        transition: Row-stochastic array of shape (N, N).
        initial: Index of the initial state.
        accepting: Boolean array of shape (N,).
        state_to_mdp: Integer array of shape (N,): the MDP state each product state observes.
        state_to_label: Tuple of N labels, state_to_label[i] == L(state_to_mdp[i]).
    """
    transition: np.ndarray
    initial: int
    accepting: np.ndarray
    state_to_mdp: np.ndarray
    state_to_label: tuple

    def __post_init__(self):
        transition = np.array(self.transition, dtype=np.float64)
        if transition.ndim != 2 or transition.shape[0] != transition.shape[1]:
            raise ValueError("Transition matrix must be square.")
        _check_row_stochastic(transition, 1e-9, "Transition matrix")
        transition.flags.writeable = False
        object.__setattr__(self, 'transition', transition)
        object.__setattr__(self, 'accepting', np.asarray(self.accepting, dtype=bool))
        object.__setattr__(self, 'state_to_mdp', np.asarray(self.state_to_mdp, dtype=np.int64))
        object.__setattr__(self, 'state_to_label', tuple(frozenset(label) for label in self.state_to_label))
        n = transition.shape[0]
        if not (self.accepting.shape == self.state_to_mdp.shape == (n,) and len(self.state_to_label) == n):
            raise ValueError("Per-state arrays must have length {}.".format(n))
        if not 0 <= self.initial < n:
            raise ValueError("Initial state {} is out of range.".format(self.initial))

    @property
    def num_states(self):
        return self.transition.shape[0]

    @property
    def num_mdp_states(self):
        return int(self.state_to_mdp.max()) + 1

    def state_names(self):
        num_mdp_states = self.num_mdp_states
        return ['s{}q{}'.format(index % num_mdp_states, index // num_mdp_states) for index in range(self.num_states)]


def build_product(mdp, ta):
    """Builds the product MDP M x A.

    P((s', q') | (s, q), a) = P(s' | s, a) if q' = delta(q, L(s')), and 0 otherwise. Moving into a product state whose
    automaton component is accepting earns reward 1.
    """
    missing = [(state, automata.format_label(label)) for state in ta.states for label in mdp.label_set()
               if ta.step(state, label) is None]
    if missing:
        raise ValueError("Task automaton is incomplete over the labels of the MDP; missing {}.".format(missing[:5]))

    num_mdp_states = mdp.num_states
    q_index = {state: index for index, state in enumerate(ta.states)}
    n = len(ta.states) * num_mdp_states
    num_actions = len(mdp.actions)

    successors = np.empty((num_actions, n), dtype=np.int64)
    for action in range(num_actions):
        for q in ta.states:
            for s in mdp.states:
                s_next = int(mdp.successors[action, s])
                q_next = ta.step(q, mdp.labels[s_next])
                successors[action, q_index[q] * num_mdp_states + s] = q_index[q_next] * num_mdp_states + s_next

    per_action_transition = np.zeros((num_actions, n, n))
    for action in range(num_actions):
        per_action_transition[action, np.arange(n), successors[action]] = 1.

    accepting = np.array([ta.states[index // num_mdp_states] in ta.accepting for index in range(n)])
    initial = q_index[ta.initial] * num_mdp_states + mdp.initial_state
    for array in (per_action_transition, successors, accepting):
        array.flags.writeable = False
    return ProductModel(mdp, ta, per_action_transition, successors, initial, accepting)


def induce_chain(product, policy):
    """The product Markov chain obtained by fixing `policy`: sum_a pi(a | s) T^a."""
    if policy.action_distribution.shape[0] != product.mdp.num_states:
        raise ValueError("Policy must be defined on every MDP state.")
    weights = policy.action_distribution[product.state_to_mdp]
    transition = np.einsum('ia,aij->ij', weights, product.per_action_transition)
    return ProductChain(transition, product.initial, product.accepting, product.state_to_mdp,
                        product.state_to_label)


def observe(chain, index, mode='state'):
    """The observation emitted by a product state: its MDP state (or label) and its reward bit."""
    if mode == 'state':
        return Observation(int(chain.state_to_mdp[index]), int(chain.accepting[index]))
    elif mode == 'label':
        return Observation(chain.state_to_label[index], int(chain.accepting[index]))
    raise ValueError("Valid values for 'mode' are 'state' and 'label'.")


def extract_nfa(chain, threshold=0.):
    """The NFA underlying a product chain.

    Every edge i -> j of the chain's digraph (restricted to states reachable from the initial state) is labelled with
    the label of j's MDP state. The accepting states are the accepting product states.
    """
    digraph = hmm_learner.extract_digraph(chain.transition, threshold, chain.initial)
    transitions = co.defaultdict(set)
    for source, target in digraph.edges:
        transitions[source, chain.state_to_label[target]].add(target)
    accepting = [state for state in digraph.nodes if chain.accepting[state]]
    return automata.Nfa(digraph.nodes, chain.initial, frozenset(chain.state_to_label), transitions, accepting)


def _recover(transition, state_to_mdp, members_of, tolerance, weights, min_share):
    num_mdp_states = int(state_to_mdp.max()) + 1
    observes = np.zeros((transition.shape[0], num_mdp_states))
    observes[np.arange(transition.shape[0]), state_to_mdp] = 1.
    marginals = transition @ observes

    recovered = np.zeros((num_mdp_states, num_mdp_states))
    for s in range(num_mdp_states):
        members = members_of[s]
        if not members:
            raise InconsistentChainError("No reachable product state observes MDP state {}.".format(s))
        rows = marginals[members]
        if weights is None:
            row = rows[0]
            checked = rows
        else:
            member_weights = weights[members]
            share = member_weights / member_weights.sum()
            row = share @ rows
            checked = rows[share >= min_share]
        distances = 0.5 * np.abs(checked - row).sum(axis=1)
        if (distances > tolerance).any():
            raise InconsistentChainError("Product states observing MDP state {} disagree on its successor distribution "
                                         "(total variation {:.3g} > {:.3g}).".format(s, distances.max(), tolerance))
        recovered[s] = row / row.sum()
    return recovered


def recover_mdp_probabilities(chain, tolerance=0.1, threshold=0., weights=None, min_share=0.05):
    """Recovers the MDP's Markov chain from a product chain.

    P(s_l | s_k) is the total probability of moving from a product state observing s_k into product states observing
    s_l. Only product states reachable (at `threshold`) from the initial state are used.

    Arguments:
        chain: A ProductChain.
        tolerance: Largest total-variation distance allowed between product states observing the same MDP state.
        threshold: Edge threshold used to decide reachability.
        weights: Optional per-product-state weights (e.g. expected visit counts of a learned model). If given, the
            weighted mean over product states is returned, and only states carrying at least `min_share` of the
            weight of their MDP state are checked against the tolerance. If not given, the first reachable product
            state is used and all of them are checked.
        min_share: See `weights`.

    Returns:
        A row-stochastic array of shape (|S|, |S|).
    """
    reachable = hmm_learner.extract_digraph(chain.transition, threshold, chain.initial).nodes
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        reachable = [state for state in reachable if weights[state] > 0]
    members_of = co.defaultdict(list)
    for state in reachable:
        members_of[int(chain.state_to_mdp[state])].append(state)
    return _recover(chain.transition, chain.state_to_mdp, members_of, tolerance, weights, min_share)


def recover_mdp_action_probabilities(product, tolerance=0.1):
    """Per-action form of `recover_mdp_probabilities`: returns an array of shape (num_actions, |S|, |S|)."""
    union = product.per_action_transition.max(axis=0)
    reachable = hmm_learner.extract_digraph(union / union.sum(axis=1, keepdims=True), 0., product.initial).nodes
    members_of = co.defaultdict(list)
    for state in reachable:
        members_of[int(product.state_to_mdp[state])].append(state)
    return np.stack([_recover(transition, product.state_to_mdp, members_of, tolerance, None, 0.)
                     for transition in product.per_action_transition])


def _observation_codes(chain_a, chain_b, mode):
    keys = {}
    codes = []
    for chain in (chain_a, chain_b):
        codes.append(np.array([keys.setdefault(observe(chain, index, mode), len(keys))
                               for index in range(chain.num_states)]))
    return codes[0], codes[1], len(keys)


def _check_size(max_states, *models):
    for model in models:
        if model.num_states > max_states:
            raise ValueError("Observational equivalence is checked by enumeration and is limited to {} states; got {}."
                             "".format(max_states, model.num_states))


def observationally_equivalent(p1, p2, horizon, mode='state', atol=1e-9, max_states=1024):
    """Whether two product chains give every observation sequence of length <= horizon + 1 the same probability.

    The check is exact: it enumerates observation sequences depth first, carrying the (unnormalised) forward vector
    of each chain, and prunes sequences that have probability zero under both.
    """
    _check_size(max_states, p1, p2)
    codes1, codes2, num_codes = _observation_codes(p1, p2, mode)
    if codes1[p1.initial] != codes2[p2.initial]:
        return False
    alpha1 = np.zeros(p1.num_states)
    alpha1[p1.initial] = 1.
    alpha2 = np.zeros(p2.num_states)
    alpha2[p2.initial] = 1.

    stack = [(alpha1, alpha2, 0)]
    while stack:
        alpha1, alpha2, depth = stack.pop()
        if depth == horizon:
            continue
        step1 = alpha1 @ p1.transition
        step2 = alpha2 @ p2.transition
        mass1 = np.bincount(codes1, weights=step1, minlength=num_codes)
        mass2 = np.bincount(codes2, weights=step2, minlength=num_codes)
        if not np.allclose(mass1, mass2, rtol=0, atol=atol):
            return False
        for code in np.flatnonzero((mass1 > 0) | (mass2 > 0)):
            stack.append((np.where(codes1 == code, step1, 0.), np.where(codes2 == code, step2, 0.), depth + 1))
    return True


def observationally_equivalent_mdp(m1, m2, horizon, atol=1e-9, max_states=256):
    """Observational equivalence of two product MDPs, for every action sequence of length <= horizon."""
    if len(m1.mdp.actions) != len(m2.mdp.actions):
        raise ValueError("Product MDPs must share their action space.")
    _check_size(max_states, m1, m2)
    chains = [ProductChain(np.eye(m.num_states), m.initial, m.accepting, m.state_to_mdp, m.state_to_label)
              for m in (m1, m2)]
    codes1, codes2, num_codes = _observation_codes(chains[0], chains[1], 'state')
    if codes1[m1.initial] != codes2[m2.initial]:
        return False
    alpha1 = np.zeros(m1.num_states)
    alpha1[m1.initial] = 1.
    alpha2 = np.zeros(m2.num_states)
    alpha2[m2.initial] = 1.

    stack = [(alpha1, alpha2, 0)]
    while stack:
        alpha1, alpha2, depth = stack.pop()
        if depth == horizon:
            continue
        for action in range(len(m1.mdp.actions)):
            step1 = alpha1 @ m1.per_action_transition[action]
            step2 = alpha2 @ m2.per_action_transition[action]
            mass1 = np.bincount(codes1, weights=step1, minlength=num_codes)
            mass2 = np.bincount(codes2, weights=step2, minlength=num_codes)
            if not np.allclose(mass1, mass2, rtol=0, atol=atol):
                return False
            for code in np.flatnonzero((mass1 > 0) | (mass2 > 0)):
                stack.append((np.where(codes1 == code, step1, 0.), np.where(codes2 == code, step2, 0.), depth + 1))
    return True


def mdp_restricted_ta(mdp, ta):
    """The sub-automaton of `ta` covered by MDP-attainable traces.

    Keeps exactly the automaton transitions taken by some product transition reachable from <s_0, q_0>. The result is
    partial in general: transitions that no MDP path can trigger are dropped.
    """
    product = build_product(mdp, ta)
    reachable = hmm_learner.extract_digraph(induce_chain(product, mdp_env.uniform_random_policy(mdp)).transition,
                                            0., product.initial).nodes
    transitions = {}
    used_states = {ta.initial}
    for index in reachable:
        _, q = product.pair(index)
        for action in range(len(mdp.actions)):
            s_next, q_next = product.pair(int(product.successors[action, index]))
            transitions[q, mdp.labels[s_next]] = q_next
            used_states.update((q, q_next))
    states = [state for state in ta.states if state in used_states]
    accepting = [state for state in states if state in ta.accepting]
    return automata.TaskAutomaton(states, ta.initial, ta.alphabet, transitions, accepting)


def mdp_nfa(mdp):
    """The NFA reading the labels of the states an agent can move through, i.e. the MDP's attainable traces."""
    transitions = co.defaultdict(set)
    for state in mdp.states:
        for action in range(len(mdp.actions)):
            target = int(mdp.successors[action, state])
            transitions[state, mdp.labels[target]].add(target)
    return automata.Nfa(mdp.states, mdp.initial_state, mdp.label_set(), transitions, mdp.states)


def attainable_trace_automaton(nfa):
    """A partial DFA whose defined runs are exactly the label sequences the NFA can read (its attainable traces)."""
    everything = automata.Nfa(nfa.states, nfa.initial, nfa.alphabet, nfa.transitions, nfa.states)
    return automata.subset_construction(everything)


def count_product_trajectories(chain, max_length):
    return mdp_env.count_trajectories(chain.transition, chain.initial, max_length)
