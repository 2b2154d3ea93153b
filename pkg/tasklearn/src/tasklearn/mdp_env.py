"""Labelled gridworld MDPs, exploration policies, and episode generation.

States are numbered row-major with row 0 at the bottom of the grid, so the bottom-left cell is state 0. Moves are
deterministic, and moving into a wall leaves the agent where it is; all randomness in the dynamics comes from the
exploration policy.
"""
import dataclasses
import functools
import joblib
import logging
import numpy as np

from . import automata


_log = logging.getLogger(__name__)

ACTIONS = ('up', 'down', 'left', 'right')
_OFFSETS = ((1, 0), (-1, 0), (0, -1), (0, 1))


class GridError(ValueError):
    """Raised when a gridworld cannot be constructed as requested."""


class SimulationError(RuntimeError):
    """Raised when episodes cannot be generated, e.g. because the hidden automaton is not complete."""


@dataclasses.dataclass(frozen=True)
class LabelledMdp:
    """A labelled gridworld MDP.

    Attributes:
        width: Number of columns.
        height: Number of rows.
        labels: A tuple with one label (a frozenset of proposition names) per state.
        initial_state: Index of the initial state.
        alphabet: The set of atomic propositions.
    """
    width: int
    height: int
    labels: tuple
    initial_state: int
    alphabet: frozenset

    def __post_init__(self):
        object.__setattr__(self, 'labels', tuple(automata.parse_label(label) if isinstance(label, str)
                                                 else frozenset(label) for label in self.labels))
        object.__setattr__(self, 'alphabet', frozenset(self.alphabet))
        if self.width < 1 or self.height < 1:
            raise GridError("Grid dimensions must be at least 1, got {}x{}.".format(self.width, self.height))
        if len(self.labels) != self.width * self.height:
            raise GridError("Expected {} labels, got {}.".format(self.width * self.height, len(self.labels)))
        if not 0 <= self.initial_state < self.num_states:
            raise GridError("Initial state {} is out of range.".format(self.initial_state))
        for label in self.labels:
            if not label <= self.alphabet:
                raise GridError("Label {!r} uses propositions outside the alphabet."
                                "".format(automata.format_label(label)))

    @property
    def num_states(self):
        return self.width * self.height

    @property
    def states(self):
        return range(self.num_states)

    @property
    def actions(self):
        return ACTIONS

    def cell(self, state):
        """The (row, col) cell of a state."""
        return divmod(state, self.width)

    def state_of(self, row, col):
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise GridError("Cell {} is outside a {}x{} grid.".format((row, col), self.width, self.height))
        return row * self.width + col

    def label_set(self):
        """The labels actually used by some state, i.e. L(S)."""
        return frozenset(self.labels)

    def num_walls(self, state):
        row, col = self.cell(state)
        return sum(not (0 <= row + dr < self.height and 0 <= col + dc < self.width) for dr, dc in _OFFSETS)

    @functools.cached_property
    def successors(self):
        """Array of shape (num_actions, num_states): the deterministic successor of each state under each action."""
        out = np.empty((len(ACTIONS), self.num_states), dtype=np.int64)
        for state in self.states:
            for action in range(len(ACTIONS)):
                out[action, state] = move(self, state, action)
        out.flags.writeable = False
        return out


@dataclasses.dataclass(frozen=True)
class Policy:
    """A stationary policy: `action_distribution[s, a]` is the probability of action a in state s."""
    action_distribution: np.ndarray

    def __post_init__(self):
        distribution = np.array(self.action_distribution, dtype=np.float64)
        if distribution.ndim != 2 or distribution.shape[1] != len(ACTIONS):
            raise ValueError("Policy must have shape (num_states, {}).".format(len(ACTIONS)))
        if (distribution < 0).any() or not np.allclose(distribution.sum(axis=1), 1, rtol=0, atol=1e-12):
            raise ValueError("Every row of the policy must be a probability distribution.")
        distribution.flags.writeable = False
        object.__setattr__(self, 'action_distribution', distribution)


@dataclasses.dataclass(frozen=True)
class Episode:
    """One episode of experience: aligned states, trace and rewards, each of length T + 1."""
    states: tuple
    trace: tuple
    rewards: tuple

    def __post_init__(self):
        object.__setattr__(self, 'states', tuple(int(state) for state in self.states))
        object.__setattr__(self, 'trace', tuple(automata.parse_label(label) if isinstance(label, str)
                                                else frozenset(label) for label in self.trace))
        object.__setattr__(self, 'rewards', tuple(int(reward) for reward in self.rewards))
        if not len(self.states) == len(self.trace) == len(self.rewards):
            raise ValueError("States, trace and rewards must have the same length, got {}, {} and {}."
                             "".format(len(self.states), len(self.trace), len(self.rewards)))
        if not self.states:
            raise ValueError("An episode contains at least its initial state.")
        if any(reward not in (0, 1) for reward in self.rewards):
            raise ValueError("Rewards must be 0 or 1.")
        if any(earlier > later for earlier, later in zip(self.rewards, self.rewards[1:])):
            raise ValueError("Rewards must be non-decreasing: accepting states are absorbing.")

    def __len__(self):
        return len(self.states)

    def check_labelling(self, mdp):
        """Raises ValueError unless trace[t] == L(states[t]) for all t."""
        for t, (state, label) in enumerate(zip(self.states, self.trace)):
            if not 0 <= state < mdp.num_states:
                raise ValueError("State {} at step {} is not a state of the MDP.".format(state, t))
            if mdp.labels[state] != label:
                raise ValueError("Trace label {!r} at step {} does not match L({}) = {!r}."
                                 "".format(automata.format_label(label), t, state,
                                           automata.format_label(mdp.labels[state])))


def build_gridworld(width, height, labelled_cells, initial_cell=(0, 0)):
    """Builds a labelled gridworld.

    Arguments:
        width: Number of columns.
        height: Number of rows.
        labelled_cells: A mapping from (row, col) cells to labels. Labels may be frozensets of proposition names, or
            label tokens such as 'coffee' or 'coffee+tv'. Cells not mentioned are labelled with the empty label.
        initial_cell: The (row, col) cell the agent starts in. Row 0 is the bottom row.

    Returns:
        A LabelledMdp.
    """
    if width < 1 or height < 1:
        raise GridError("Grid dimensions must be at least 1, got {}x{}.".format(width, height))
    labels = [automata.EMPTY] * (width * height)
    for (row, col), label in labelled_cells.items():
        if not (0 <= row < height and 0 <= col < width):
            raise GridError("Labelled cell {} is outside a {}x{} grid.".format((row, col), width, height))
        if isinstance(label, str):
            label = automata.parse_label(label)
        labels[row * width + col] = frozenset(label)
    row, col = initial_cell
    if not (0 <= row < height and 0 <= col < width):
        raise GridError("Initial cell {} is outside a {}x{} grid.".format(initial_cell, width, height))
    alphabet = frozenset().union(*labels)
    return LabelledMdp(width, height, labels, row * width + col, alphabet)


def move(mdp, state, action):
    """The cell reached by taking `action` (an index or name) in `state`; walls keep the agent in place."""
    if isinstance(action, str):
        action = ACTIONS.index(action)
    row, col = mdp.cell(state)
    dr, dc = _OFFSETS[action]
    new_row, new_col = row + dr, col + dc
    if 0 <= new_row < mdp.height and 0 <= new_col < mdp.width:
        return new_row * mdp.width + new_col
    return state


def uniform_random_policy(mdp):
    return Policy(np.full((mdp.num_states, len(ACTIONS)), 1 / len(ACTIONS)))


def induced_chain(mdp, policy):
    """The Markov chain over S induced by following `policy`: P(s'|s) = sum_a pi(a|s) [move(s, a) == s']."""
    transition = np.zeros((mdp.num_states, mdp.num_states))
    for action in range(len(ACTIONS)):
        np.add.at(transition, (np.arange(mdp.num_states), mdp.successors[action]),
                  policy.action_distribution[:, action])
    return transition


def count_trajectories(transition, initial, max_length):
    """Number of positive-probability state sequences starting at `initial` with at most `max_length` moves."""
    adjacency = (np.asarray(transition) > 0).astype(np.int64)
    counts = np.zeros(adjacency.shape[0], dtype=np.int64)
    counts[initial] = 1
    total = 1
    for _ in range(max_length):
        counts = counts @ adjacency
        total += int(counts.sum())
    return total


def _check_hidden_automaton(mdp, hidden_ta):
    missing = [(state, automata.format_label(label)) for state in hidden_ta.states for label in mdp.label_set()
               if hidden_ta.step(state, label) is None]
    if missing:
        raise SimulationError("The hidden task automaton has no transition for (state, label) pairs {}; complete it "
                              "first.".format(missing[:5]))
    for state in hidden_ta.accepting:
        for label in mdp.label_set():
            if hidden_ta.step(state, label) not in hidden_ta.accepting:
                raise SimulationError("Accepting state {!r} can be left on label {!r}; accepting states must be "
                                      "absorbing.".format(state, automata.format_label(label)))


def _simulate_episode(mdp, hidden_ta, cumulative_policy, episode_len, seed, index):
    # one stream per (seed, episode index): episode i does not depend on how many episodes are requested
    generator = np.random.default_rng([seed, index])
    draws = generator.random(episode_len)
    state = mdp.initial_state
    ta_state = hidden_ta.initial
    states = [state]
    rewards = [int(ta_state in hidden_ta.accepting)]
    for draw in draws:
        action = min(int(np.searchsorted(cumulative_policy[state], draw, side='right')), len(ACTIONS) - 1)
        state = int(mdp.successors[action, state])
        ta_state = hidden_ta.step(ta_state, mdp.labels[state])
        states.append(state)
        rewards.append(int(ta_state in hidden_ta.accepting))
    return Episode(states, [mdp.labels[s] for s in states], rewards)


def simulate_episodes(mdp, hidden_ta, policy, episode_len, n_episodes, seed, n_jobs=1):
    """Generates episodes of an agent following `policy` in `mdp`, rewarded by `hidden_ta`.

    The automaton reads L(s_{t+1}) after each move; the label of the initial state is never read. rewards[t] is 1
    exactly when the automaton is in an accepting state at time t. Every episode has exactly `episode_len` moves.

    Arguments:
        mdp: A LabelledMdp.
        hidden_ta: A TaskAutomaton, complete over the labels used by `mdp`, with absorbing accepting states.
        policy: A Policy.
        episode_len: Number of moves T per episode (so each sequence has length T + 1).
        n_episodes: Number of episodes.
        seed: Integer seed. Episode i uses its own stream derived from (seed, i).
        n_jobs: Passed to joblib.Parallel. The output does not depend on it.

    Returns:
        A list of Episodes.
    """
    if episode_len < 1:
        raise ValueError("episode_len must be at least 1, got {}.".format(episode_len))
    if n_episodes < 0:
        raise ValueError("n_episodes must be non-negative, got {}.".format(n_episodes))
    if policy.action_distribution.shape[0] != mdp.num_states:
        raise ValueError("Policy is defined on {} states but the MDP has {}."
                         "".format(policy.action_distribution.shape[0], mdp.num_states))
    _check_hidden_automaton(mdp, hidden_ta)
    cumulative_policy = np.cumsum(policy.action_distribution, axis=1)

    if n_jobs == 1:
        episodes = [_simulate_episode(mdp, hidden_ta, cumulative_policy, episode_len, seed, index)
                    for index in range(n_episodes)]
    else:
        episodes = joblib.Parallel(n_jobs=n_jobs)(
            joblib.delayed(_simulate_episode)(mdp, hidden_ta, cumulative_policy, episode_len, seed, index)
            for index in range(n_episodes))
    _log.info("Simulated %d episodes of length %d; %d reached reward.", n_episodes, episode_len + 1,
              sum(episode.rewards[-1] for episode in episodes))
    return episodes


def reward_fraction(episodes):
    """Fraction of episodes that obtain reward at some point."""
    if not episodes:
        return 0.
    return sum(episode.rewards[-1] for episode in episodes) / len(episodes)
