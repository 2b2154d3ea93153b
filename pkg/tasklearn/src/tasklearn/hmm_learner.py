"""Baum-Welch estimation of the hidden product chain from episodes of observations.

Hidden states use the block layout of `product_model`: hidden state q * |S| + s stands for <s, q>, block 0 holds the
initial automaton state and block k - 1 is the (single) accepting block. Observations are encoded as
reward_bit * |S| + s, or reward_bit * |labels| + label_index in label mode.

All numerics are done in float64 torch tensors. Sequences of equal length are batched together, so one pass of the
E-step costs O(T) batched matrix products regardless of the number of episodes.
"""
import collections as co
import dataclasses
import joblib
import logging
import math
import numpy as np
import scipy.sparse
import scipy.sparse.csgraph
import time
import torch
import tqdm

from . import automata
from . import mdp_env


_log = logging.getLogger(__name__)

_dtype = torch.float64


class ImpossibleObservationError(RuntimeError):
    """Raised when an observation sequence has probability zero under the current parameters."""


class NumericalError(RuntimeError):
    """Raised when training produces non-finite parameters."""


def _as_tensor(matrix):
    if isinstance(matrix, torch.Tensor):
        return matrix.detach().to(_dtype).clone()
    return torch.as_tensor(np.asarray(matrix), dtype=_dtype).clone()


@dataclasses.dataclass(frozen=True)
class HmmParams:
    """Parameters of the hidden product chain.

    Attributes:
        transition: Tensor of shape (n_hidden, n_hidden), row-stochastic.
        emission: Tensor of shape (n_hidden, n_obs), row-stochastic.
        initial: Tensor of shape (n_hidden,), a one-hot distribution.
    """
    transition: torch.Tensor
    emission: torch.Tensor
    initial: torch.Tensor

    def __post_init__(self):
        transition = _as_tensor(self.transition)
        emission = _as_tensor(self.emission)
        initial = _as_tensor(self.initial)
        n_hidden = transition.size(0)
        if transition.shape != (n_hidden, n_hidden):
            raise ValueError("Transition matrix must be square, got shape {}.".format(tuple(transition.shape)))
        if emission.ndim != 2 or emission.size(0) != n_hidden:
            raise ValueError("Emission matrix must have {} rows, got shape {}.".format(n_hidden,
                                                                                   tuple(emission.shape)))
        if initial.shape != (n_hidden,):
            raise ValueError("Initial distribution must have shape ({},).".format(n_hidden))
        for name, matrix in (('Transition', transition), ('Emission', emission)):
            if (matrix < 0).any() or not torch.allclose(matrix.sum(dim=1), torch.ones(n_hidden, dtype=_dtype),
                                                        rtol=0, atol=1e-9):
                raise ValueError("{} matrix is not row-stochastic.".format(name))
        if (initial != 0).sum() != 1 or initial.max() != 1:
            raise ValueError("Initial distribution must put all of its mass on a single hidden state.")
        object.__setattr__(self, 'transition', transition)
        object.__setattr__(self, 'emission', emission)
        object.__setattr__(self, 'initial', initial)

    @property
    def n_hidden(self):
        return self.transition.size(0)

    @property
    def n_obs(self):
        return self.emission.size(1)

    @property
    def initial_state(self):
        return int(self.initial.argmax())


@dataclasses.dataclass
class TrainReport:
    """Diagnostics of a training run.

    Attributes:
        iterations: Number of Baum-Welch passes performed.
        final_delta: Maximum absolute row sum of the last parameter change.
        log_likelihood_trace: Log-likelihood of the data under the parameters entering each pass.
        wall_time: Seconds spent training.
        converged: Whether final_delta < tol.
        unvisited_states: Hidden states whose row was kept because they had no expected visits in the last pass.
        occupancy: Expected number of visits to each hidden state in the last pass, as a numpy array.
    """
    iterations: int = 0
    final_delta: float = math.inf
    log_likelihood_trace: list = dataclasses.field(default_factory=list)
    wall_time: float = 0.
    converged: bool = False
    unvisited_states: list = dataclasses.field(default_factory=list)
    occupancy: np.ndarray = None

    def as_dict(self):
        return co.OrderedDict([('iterations', self.iterations),
                               ('final_delta', self.final_delta),
                               ('final_log_likelihood', (self.log_likelihood_trace[-1]
                                                         if self.log_likelihood_trace else math.nan)),
                               ('wall_time', self.wall_time),
                               ('converged', self.converged),
                               ('unvisited_states', len(self.unvisited_states))])


###################
# Observations
###################


def encode_episode(episode, n_states, mode='state', label_index=None):
    """Encodes an Episode as a LongTensor of observation indices.

    Arguments:
        episode: An mdp_env.Episode.
        n_states: |S|.
        mode: 'state' for observations in S x {0, 1}; 'label' for observations in L(S) x {0, 1}.
        label_index: In label mode, a mapping from labels to their indices.
    """
    if mode == 'state':
        return torch.tensor([reward * n_states + state for state, reward in zip(episode.states, episode.rewards)],
                            dtype=torch.long)
    elif mode == 'label':
        if label_index is None:
            raise ValueError("Label mode requires a label index.")
        return torch.tensor([reward * len(label_index) + label_index[label]
                             for label, reward in zip(episode.trace, episode.rewards)], dtype=torch.long)
    raise ValueError("Valid values for 'mode' are 'state' and 'label'.")


def label_order(mdp_labels):
    """The labels used by an MDP, in their canonical order. Defines the label-mode observation encoding."""
    return automata.sort_labels(set(mdp_labels))


###################
# Initial parameters
###################


def build_emission_matrix(k, n_states):
    """The structured emission matrix for k guessed automaton states.

    Block q < k - 1 emits <s, 0> from hidden state <s, q> with probability 1; block k - 1 emits <s, 1>.

    Returns:
        A tensor of shape (k * n_states, 2 * n_states).
    """
    if k < 1:
        raise ValueError("k must be at least 1, got {}.".format(k))
    reward_block = torch.zeros(k, 2, dtype=_dtype)
    reward_block[:-1, 0] = 1
    reward_block[-1, 1] = 1
    return torch.kron(reward_block, torch.eye(n_states, dtype=_dtype))


def label_emission_matrix(k, mdp_labels):
    """The structured emission matrix in label mode: hidden <s, q> emits <L(s), reward bit of q>."""
    labels = label_order(mdp_labels)
    index = {label: i for i, label in enumerate(labels)}
    n_states = len(mdp_labels)
    to_labels = torch.zeros(2 * n_states, 2 * len(labels), dtype=_dtype)
    for reward in (0, 1):
        for state, label in enumerate(mdp_labels):
            to_labels[reward * n_states + state, reward * len(labels) + index[label]] = 1
    return build_emission_matrix(k, n_states) @ to_labels


def initial_distribution(n_hidden, initial_state):
    out = torch.zeros(n_hidden, dtype=_dtype)
    out[initial_state] = 1
    return out


def _smooth(transition, epsilon):
    transition = torch.where(transition == 0, torch.full_like(transition, epsilon), transition)
    return transition / transition.sum(dim=1, keepdim=True)


def spatial_initialization(mdp, k, epsilon=None, epsilon_scale=1.):
    """Transition matrix prior encoding the grid's adjacency under the uniform random policy.

    Every cell moves to each neighbouring cell with probability 0.25 and stays put with probability 0.25 per adjacent
    wall. This matrix is copied into each of the k diagonal blocks, every zero entry is then raised to `epsilon`, and
    the rows are renormalised.

    Arguments:
        mdp: The LabelledMdp (only its geometry is used).
        k: Number of guessed automaton states.
        epsilon: Smoothing probability. Defaults to epsilon_scale / (k * |S|).
        epsilon_scale: See `epsilon`.
    """
    if k < 1:
        raise ValueError("k must be at least 1, got {}.".format(k))
    if epsilon is None:
        epsilon = epsilon_scale / (k * mdp.num_states)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive, got {}.".format(epsilon))
    grid_chain = torch.as_tensor(mdp_env.induced_chain(mdp, mdp_env.uniform_random_policy(mdp)), dtype=_dtype)
    return _smooth(torch.kron(torch.eye(k, dtype=_dtype), grid_chain), epsilon)


def uniform_initialization(n_hidden, seed):
    """A random row-stochastic matrix with strictly positive entries."""
    generator = torch.Generator().manual_seed(seed)
    # 1 - U(0, 1) lies in (0, 1]
    transition = 1 - torch.rand(n_hidden, n_hidden, generator=generator, dtype=_dtype)
    return transition / transition.sum(dim=1, keepdim=True)


def initial_params(mdp, k, init='spatial', seed=0, epsilon_scale=1., observation='state'):
    """The starting HmmParams for k guessed automaton states."""
    n_hidden = k * mdp.num_states
    if init == 'spatial':
        transition = spatial_initialization(mdp, k, epsilon_scale=epsilon_scale)
    elif init == 'uniform':
        transition = uniform_initialization(n_hidden, seed)
    else:
        raise ValueError("Valid values for 'init' are 'spatial' and 'uniform'.")
    if observation == 'state':
        emission = build_emission_matrix(k, mdp.num_states)
    elif observation == 'label':
        emission = label_emission_matrix(k, mdp.labels)
    else:
        raise ValueError("Valid values for 'observation' are 'state' and 'label'.")
    return HmmParams(transition, emission, initial_distribution(n_hidden, mdp.initial_state))


###################
# E-step
###################


def _forward_backward_batch(transition, emission, initial, observations, first_index=0):
    # observations: LongTensor of shape (batch, length)
    batch, length = observations.shape
    likelihoods = emission[:, observations].permute(1, 2, 0)  # (batch, length, n_hidden)

    alpha = torch.empty(batch, length, transition.size(0), dtype=_dtype)
    scale = torch.empty(batch, length, dtype=_dtype)
    current = initial.unsqueeze(0) * likelihoods[:, 0]
    for t in range(length):
        if t > 0:
            current = (current @ transition) * likelihoods[:, t]
        norm = current.sum(dim=1)
        if (norm == 0).any():
            episode = first_index + int((norm == 0).nonzero()[0])
            raise ImpossibleObservationError("Observation at step {} of episode {} has probability zero under the "
                                             "current parameters.".format(t, episode))
        current = current / norm.unsqueeze(1)
        alpha[:, t] = current
        scale[:, t] = norm

    beta = torch.empty_like(alpha)
    beta[:, -1] = 1
    for t in range(length - 2, -1, -1):
        beta[:, t] = ((likelihoods[:, t + 1] * beta[:, t + 1]) @ transition.T) / scale[:, t + 1].unsqueeze(1)

    gamma = alpha * beta
    gamma = gamma / gamma.sum(dim=2, keepdim=True)
    # sum over the batch and over t of alpha_t(i) P_ij E_j(o_{t+1}) beta_{t+1}(j) / c_{t+1}
    weighted = likelihoods[:, 1:] * beta[:, 1:] / scale[:, 1:].unsqueeze(2)
    xi = transition * torch.einsum('bti,btj->ij', alpha[:, :-1], weighted)
    return gamma, xi, scale.log().sum(dim=1)


def forward_backward(params, obs):
    """Scaled forward-backward recursion on a single observation sequence.

    Returns:
        A tuple (gamma, xi, log_likelihood): gamma of shape (T, n_hidden) with rows summing to 1, xi the (n_hidden,
        n_hidden) sum over t of the expected transition counts, and the log-probability of the sequence.
    """
    obs = torch.as_tensor(obs, dtype=torch.long)
    if obs.ndim != 1 or obs.numel() == 0:
        raise ValueError("Expected a non-empty one dimensional observation sequence.")
    if int(obs.max()) >= params.n_obs or int(obs.min()) < 0:
        raise ValueError("Observation indices must lie in [0, {}).".format(params.n_obs))
    gamma, xi, log_likelihood = _forward_backward_batch(params.transition, params.emission, params.initial,
                                                        obs.unsqueeze(0))
    return gamma[0], xi, float(log_likelihood[0])


_Statistics = co.namedtuple('_Statistics', ['xi', 'emission_counts', 'occupancy', 'log_likelihood'])


def _chunk_statistics(params, chunk, first_index):
    gamma, xi, log_likelihood = _forward_backward_batch(params.transition, params.emission, params.initial, chunk,
                                                        first_index)
    emission_counts = torch.zeros_like(params.emission)
    emission_counts.index_put_((torch.arange(params.n_hidden).repeat(chunk.numel()),
                                chunk.reshape(-1).repeat_interleave(params.n_hidden)),
                               gamma.reshape(-1), accumulate=True)
    return _Statistics(xi, emission_counts, gamma.sum(dim=(0, 1)), float(log_likelihood.sum()))


def _chunks(episodes, chunk_size):
    # episodes of equal length are stacked; the order of chunks is fixed by (length, first index)
    by_length = co.defaultdict(list)
    for index, obs in enumerate(episodes):
        by_length[obs.numel()].append(index)
    for length in sorted(by_length):
        indices = by_length[length]
        for start in range(0, len(indices), chunk_size):
            chosen = indices[start:start + chunk_size]
            yield chosen[0], torch.stack([episodes[index] for index in chosen])


def _expectation(params, episodes, n_jobs=1, chunk_size=512):
    chunks = list(_chunks(episodes, chunk_size))
    if n_jobs == 1:
        statistics = [_chunk_statistics(params, chunk, first) for first, chunk in chunks]
    else:
        statistics = joblib.Parallel(n_jobs=n_jobs)(joblib.delayed(_chunk_statistics)(params, chunk, first)
                                                    for first, chunk in chunks)
    # fixed reduction order
    xi = sum((s.xi for s in statistics), torch.zeros_like(params.transition))
    emission_counts = sum((s.emission_counts for s in statistics), torch.zeros_like(params.emission))
    occupancy = sum((s.occupancy for s in statistics), torch.zeros(params.n_hidden, dtype=_dtype))
    log_likelihood = math.fsum(s.log_likelihood for s in statistics)
    return _Statistics(xi, emission_counts, occupancy, log_likelihood)


def _normalise(counts, fallback, dim):
    total = counts.sum(dim=dim, keepdim=True)
    return torch.where(total > 0, counts / total.clamp_min(1e-300), fallback)


def _product_transition(xi, old_transition, block_size):
    """Re-estimates the transition matrix in product form.

    With k = n_hidden / block_size, hidden <s, q> moves to <s', q'> with probability moves[q, s, s'] *
    switches[q, q', s']: the automaton component only depends on where it came from and which grid state was entered.
    Both factors are maximised from the expected transition counts `xi`.
    """
    n_hidden = xi.size(0)
    k = n_hidden // block_size
    xi = xi.reshape(k, block_size, k, block_size)
    old = old_transition.reshape(k, block_size, k, block_size)

    moves = _normalise(xi.sum(dim=2), old.sum(dim=2), dim=2)
    old_switches = _normalise(old.sum(dim=1), torch.full((k, k, block_size), 1 / k, dtype=_dtype), dim=1)
    switches = _normalise(xi.sum(dim=1), old_switches, dim=1)
    return (moves.unsqueeze(2) * switches.unsqueeze(1)).reshape(n_hidden, n_hidden)


def _maximisation(params, statistics, learn_emission, block_size=None):
    denominator = statistics.xi.sum(dim=1, keepdim=True)
    visited = denominator.squeeze(1) > 0
    if block_size is None:
        transition = torch.where(visited.unsqueeze(1), statistics.xi / denominator.clamp_min(1e-300),
                                 params.transition)
    else:
        transition = _product_transition(statistics.xi, params.transition, block_size)
    transition = transition / transition.sum(dim=1, keepdim=True)
    emission = params.emission
    if learn_emission:
        counts = statistics.emission_counts
        seen = counts.sum(dim=1, keepdim=True)
        emission = torch.where(seen > 0, counts / seen.clamp_min(1e-300), params.emission)
        emission = emission / emission.sum(dim=1, keepdim=True)
    if not (torch.isfinite(transition).all() and torch.isfinite(emission).all()):
        raise NumericalError("Non-finite parameters after a Baum-Welch pass.")
    new_params = HmmParams(transition, emission, params.initial)
    delta = float((transition - params.transition).abs().sum(dim=1).max())
    unvisited = (~visited).nonzero().flatten().tolist()
    return new_params, delta, unvisited


def _check_episodes(params, episodes):
    episodes = [torch.as_tensor(obs, dtype=torch.long) for obs in episodes]
    if not episodes:
        raise ValueError("At least one episode is required.")
    for index, obs in enumerate(episodes):
        if obs.ndim != 1 or obs.numel() == 0:
            raise ValueError("Episode {} is not a non-empty one dimensional sequence.".format(index))
        if int(obs.max()) >= params.n_obs or int(obs.min()) < 0:
            raise ValueError("Episode {} has observations outside [0, {}).".format(index, params.n_obs))
    return episodes


def _check_block_size(params, block_size):
    if block_size is not None and (block_size < 1 or params.n_hidden % block_size != 0):
        raise ValueError("{} hidden states do not form blocks of {} MDP states.".format(params.n_hidden, block_size))


def baum_welch_pass(params, episodes, learn_emission=False, n_jobs=1, block_size=None):
    """One Baum-Welch pass over all episodes.

    Expected counts are accumulated over every episode before dividing. The emission matrix is held fixed unless
    `learn_emission=True`. A hidden state with no expected visits keeps its previous transition row.

    If `block_size` (the number of MDP states) is given, the transition matrix is instead re-estimated in product
    form: each hidden state <s, q> gets its own distribution over the next grid state s', and the next automaton
    state is shared by every <s, q> entering s'. Chains of this form are exactly the products of a grid chain with a
    (possibly stochastic) automaton. Unvisited hidden states keep their previous distribution over grid states.

    Returns:
        A tuple (new_params, delta), where delta is the maximum absolute row sum of the change in the transition
        matrix.
    """
    episodes = _check_episodes(params, episodes)
    _check_block_size(params, block_size)
    new_params, delta, _ = _maximisation(params, _expectation(params, episodes, n_jobs), learn_emission, block_size)
    return new_params, delta


def train(init, episodes, tol=1e-6, max_iters=20000, learn_emission=False, n_jobs=1, verbose=False,
          checkpoint_every=0, checkpoint_fn=None, block_size=None):
    """Runs Baum-Welch passes until the parameter change drops below `tol`.

    Arguments:
        init: The starting HmmParams.
        episodes: A sequence of observation sequences (1D integer tensors or lists).
        tol: Stop once the maximum absolute row sum of the change in the transition matrix is below this.
        max_iters: Maximum number of passes.
        learn_emission: Whether to re-estimate the emission matrix as well.
        block_size: If given, re-estimate the transition matrix in product form with blocks of this many MDP states;
            see `baum_welch_pass`.
        n_jobs: Passed to joblib.Parallel for the E-step. The output does not depend on it.
        verbose: Whether to display a progress bar.
        checkpoint_every: If positive, `checkpoint_fn(iteration, params)` is called every this many passes.
        checkpoint_fn: See `checkpoint_every`.

    Returns:
        A tuple (params, report) of the trained HmmParams and a TrainReport.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1, got {}.".format(max_iters))
    episodes = _check_episodes(init, episodes)
    _check_block_size(init, block_size)
    report = TrainReport()
    params = init
    start = time.perf_counter()

    print_freq = 100
    tqdm_range = tqdm.tqdm(range(1, max_iters + 1), disable=not verbose)
    for iteration in tqdm_range:
        statistics = _expectation(params, episodes, n_jobs)
        try:
            params, delta, unvisited = _maximisation(params, statistics, learn_emission, block_size)
        except NumericalError as e:
            raise NumericalError("Pass {}: {}".format(iteration, e)) from e
        report.iterations = iteration
        report.final_delta = delta
        report.log_likelihood_trace.append(statistics.log_likelihood)
        report.unvisited_states = unvisited
        report.occupancy = statistics.occupancy.numpy()
        _log.debug("Pass %d: delta %.3e, log-likelihood %.6f", iteration, delta, statistics.log_likelihood)
        if verbose and iteration % print_freq == 0:
            tqdm_range.write('Pass: {}  Delta: {:.3e}  Log-likelihood: {:.6}'.format(iteration, delta,
                                                                                   statistics.log_likelihood))
        if checkpoint_every > 0 and checkpoint_fn is not None and iteration % checkpoint_every == 0:
            checkpoint_fn(iteration, params)
        if delta < tol:
            report.converged = True
            break

    report.wall_time = time.perf_counter() - start
    if report.unvisited_states:
        _log.info("%d hidden states were never visited; their rows were kept.", len(report.unvisited_states))
    _log.info("Training %s after %d passes (delta %.3e) in %.1fs.",
              'converged' if report.converged else 'stopped', report.iterations, report.final_delta, report.wall_time)
    return params, report


###################
# Structure
###################


@dataclasses.dataclass(frozen=True)
class Digraph:
    """The positive-probability digraph of a chain, restricted to the states reachable from `initial`.

    Attributes:
        nodes: Sorted list of reachable states.
        edges: Sorted list of (source, target) pairs.
        initial: The initial state.
    """
    nodes: list
    edges: list
    initial: int

    def successors(self, node):
        return [target for source, target in self.edges if source == node]


def extract_digraph(transition, threshold=0., initial=0):
    """The digraph with an edge i -> j iff transition[i, j] > threshold, restricted to states reachable from
    `initial`."""
    if isinstance(transition, torch.Tensor):
        transition = transition.detach().cpu().numpy()
    adjacency = scipy.sparse.csr_matrix(np.asarray(transition) > threshold)
    reachable = np.sort(scipy.sparse.csgraph.breadth_first_order(adjacency, initial, directed=True,
                                                                 return_predecessors=False))
    in_reachable = np.zeros(adjacency.shape[0], dtype=bool)
    in_reachable[reachable] = True
    sources, targets = adjacency.nonzero()
    edges = sorted((int(i), int(j)) for i, j in zip(sources, targets) if in_reachable[i])
    return Digraph([int(node) for node in reachable], edges, int(initial))


def learned_chain(params, mdp_labels):
    """Views HmmParams as a product_model.ProductChain.

    Hidden state i observes MDP state i mod |S|, and is accepting when it emits reward 1.
    """
    from . import product_model
    n_states = len(mdp_labels)
    if params.n_hidden % n_states != 0:
        raise ValueError("{} hidden states do not form blocks of {} MDP states.".format(params.n_hidden, n_states))
    state_to_mdp = np.arange(params.n_hidden) % n_states
    # the upper half of the observation columns carries reward bit 1, in both observation modes
    accepting = (params.emission[:, params.n_obs // 2:].sum(dim=1) > 0.5).numpy()
    return product_model.ProductChain(params.transition.numpy(), params.initial_state, accepting, state_to_mdp,
                                      [mdp_labels[s] for s in state_to_mdp])


def ground_truth_params(chain):
    """The HmmParams of a known product chain, with state-mode emissions."""
    n_states = chain.num_mdp_states
    emission = torch.zeros(chain.num_states, 2 * n_states, dtype=_dtype)
    emission[torch.arange(chain.num_states),
             torch.as_tensor(chain.accepting.astype(np.int64) * n_states + chain.state_to_mdp)] = 1
    return HmmParams(torch.as_tensor(chain.transition, dtype=_dtype), emission,
                     initial_distribution(chain.num_states, chain.initial))
