"""Learning a task automaton end to end: Baum-Welch, Cone Lumping, then de-biasing."""
import dataclasses
import logging

from . import automata
from . import debiasing
from . import distiller
from . import hmm_learner
from . import product_model


_log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class PipelineResult:
    """Everything produced by `learn_task_automaton`.

    Attributes:
        k: The number of automaton states that was guessed.
        params: The learned HmmParams.
        train_report: The hmm_learner.TrainReport.
        distilled: The complete automaton produced by Cone Lumping, before de-biasing.
        debias_report: The debiasing.DebiasReport; its `automaton` is the final result.
    """
    k: int
    params: hmm_learner.HmmParams
    train_report: hmm_learner.TrainReport
    distilled: automata.TaskAutomaton
    debias_report: debiasing.DebiasReport

    @property
    def automaton(self):
        return self.debias_report.automaton


def encode_episodes(mdp, episodes, observation='state'):
    label_index = None
    if observation == 'label':
        label_index = {label: index for index, label in enumerate(hmm_learner.label_order(mdp.labels))}
    return [hmm_learner.encode_episode(episode, mdp.num_states, observation, label_index) for episode in episodes]


def block_size_for(mdp, structure):
    if structure == 'product':
        return mdp.num_states
    elif structure == 'free':
        return None
    raise ValueError("Valid values for 'structure' are 'product' and 'free'.")


def learn_task_automaton(mdp, episodes, k=3, init='spatial', seed=0, tol=1e-6, max_iters=20000, threshold=0.01,
                         epsilon_scale=1., observation='state', learn_emission=False, structure='product', n_jobs=1,
                         verbose=False):
    """Learns a task automaton from episodes of experience in `mdp`.

    1. Learn the hidden product chain with Baum-Welch, guessing k automaton states.
       With structure='product' (the default) every pass re-estimates the chain in product form; 'free' runs plain
       Baum-Welch on the whole transition matrix.
    2. Extract its NFA (edges above `threshold`) and determinise it by Cone Lumping.
    3. Remove environmentally biased labels, checking every guess against the episodes, and minimise.

    Raises:
        hmm_learner.ImpossibleObservationError: if the episodes are impossible under the k-state model.
        distiller.StructuralError: if the learned digraph is not a product structure.
        debiasing.InconsistentAutomatonError: if the distilled automaton does not reproduce the episodes' rewards.

    Returns:
        A PipelineResult.
    """
    if k < 1:
        raise ValueError("k must be at least 1, got {}.".format(k))
    if not episodes:
        raise ValueError("At least one episode is required.")
    block_size = block_size_for(mdp, structure)
    init_params = hmm_learner.initial_params(mdp, k, init=init, seed=seed, epsilon_scale=epsilon_scale,
                                             observation=observation)
    params, report = hmm_learner.train(init_params, encode_episodes(mdp, episodes, observation), tol=tol,
                                       max_iters=max_iters, learn_emission=learn_emission, n_jobs=n_jobs,
                                       verbose=verbose, block_size=block_size)
    distilled = distiller.distill_ta(params, mdp.labels, threshold)
    debias_report = debiasing.remove_environmental_bias_report(distilled, episodes)
    _log.info("k=%d: distilled %d states, %d after de-biasing.", k, len(distilled.states),
              debias_report.states_after)
    return PipelineResult(k, params, report, distilled, debias_report)


@dataclasses.dataclass(frozen=True)
class SweepEntry:
    k: int
    error: str
    result: PipelineResult = None

    @property
    def succeeded(self):
        return self.result is not None


def sweep_k(mdp, episodes, k_max, **kwargs):
    """Tries k = 1, ..., k_max and stops at the first k whose learned automaton explains every episode.

    Returns:
        A pair (result, entries): the first successful PipelineResult (or None) and one SweepEntry per k tried.
    """
    entries = []
    for k in range(1, k_max + 1):
        try:
            result = learn_task_automaton(mdp, episodes, k=k, **kwargs)
        except (hmm_learner.ImpossibleObservationError, hmm_learner.NumericalError, distiller.StructuralError,
                debiasing.InconsistentAutomatonError) as e:
            _log.info("k=%d failed: %s", k, e)
            entries.append(SweepEntry(k, '{}: {}'.format(type(e).__name__, e)))
        else:
            entries.append(SweepEntry(k, '', result))
            return result, entries
    return None, entries


def _common_alphabet(a, b):
    alphabet = a.alphabet | b.alphabet
    return automata.complete(a, alphabet=alphabet), automata.complete(b, alphabet=alphabet)


def attainable_counterexample(automaton, reference, mdp):
    """A shortest MDP-attainable trace on which two task automata disagree, or None.

    Missing labels are read as self-loops in both automata.
    """
    automaton, reference = _common_alphabet(automaton, reference)
    within = product_model.attainable_trace_automaton(product_model.mdp_nfa(mdp))
    return automata.find_counterexample(automaton, reference, within=within)


def counterexample(automaton, reference):
    """A shortest trace on which two task automata disagree, or None. Missing labels are read as self-loops."""
    automaton, reference = _common_alphabet(automaton, reference)
    return automata.find_counterexample(automaton, reference)
