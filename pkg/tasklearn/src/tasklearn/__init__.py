from .automata import (EMPTY, Nfa, TaskAutomaton, complete, find_counterexample, format_label, language_equivalent,
                       make_label, minimize, parse_label, run, subset_construction)
from .debiasing import (DebiasReport, InconsistentAutomatonError, is_consistent, merge_on_label,
                        remove_environmental_bias, remove_environmental_bias_report)
from .distiller import LumpPartition, StructuralError, cone_lump, distill_ta, lump_complexity_probe
from .formats import FormatError
from .hmm_learner import (HmmParams, ImpossibleObservationError, NumericalError, TrainReport, baum_welch_pass,
                          build_emission_matrix, extract_digraph, forward_backward, spatial_initialization, train,
                          uniform_initialization)
from .mdp_env import (Episode, GridError, LabelledMdp, Policy, SimulationError, build_gridworld, move,
                      simulate_episodes, uniform_random_policy)
from .pipeline import PipelineResult, learn_task_automaton, sweep_k
from .product_model import (InconsistentChainError, ProductChain, ProductModel, build_product, extract_nfa,
                            induce_chain, observationally_equivalent, recover_mdp_probabilities)

__version__ = '0.1.0'
