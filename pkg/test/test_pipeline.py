import numpy as np
import pytest

from tasklearn import automata
from tasklearn import hmm_learner
from tasklearn import pipeline
from tasklearn import product_model
from tasklearn import worlds

import common
import conftest


def test_learn_rejects_bad_arguments(library):
    mdp, book, _ = library
    episodes = conftest.simulate(mdp, book, 5, 3)
    with pytest.raises(ValueError):
        pipeline.learn_task_automaton(mdp, episodes, k=0)
    with pytest.raises(ValueError):
        pipeline.learn_task_automaton(mdp, [], k=2)


def test_sweep_k_skips_impossible_guesses(library):
    mdp, book, _ = library
    episodes = conftest.simulate(mdp, book, 12, 40)
    result, entries = pipeline.sweep_k(mdp, episodes, 2, max_iters=1)
    # a single automaton state cannot emit both rewards
    assert entries[0].k == 1
    assert not entries[0].succeeded
    assert 'ImpossibleObservationError' in entries[0].error
    assert len(entries) <= 2


def test_counterexamples(library):
    mdp, book, carpet_book = library
    assert pipeline.counterexample(book, carpet_book) == (automata.make_label('book'),)
    assert pipeline.attainable_counterexample(book, carpet_book, mdp) is None


def test_structure_option(library):
    mdp, book, _ = library
    episodes = conftest.simulate(mdp, book, 5, 3)
    assert pipeline.block_size_for(mdp, 'product') == mdp.num_states
    assert pipeline.block_size_for(mdp, 'free') is None
    with pytest.raises(ValueError):
        pipeline.learn_task_automaton(mdp, episodes, k=2, structure='blocks')


@pytest.mark.slow
def test_library_end_to_end(library):
    mdp, book, _ = library
    episodes = conftest.simulate(mdp, book, 15, 200)
    result = pipeline.learn_task_automaton(mdp, episodes, k=2)
    assert result.train_report.converged
    assert pipeline.attainable_counterexample(result.automaton, book, mdp) is None
    assert len(result.automaton.states) == 2


@pytest.mark.slow
def test_grid3_coffee_stairs():
    results = [common.main('grid3', 'coffee_stairs', seed, 34, 275, 3, 'spatial') for seed in range(3)]
    assert sum(result['correct'] for result in results) >= 2
    for result in results:
        if result['correct']:
            assert result['learned_states'] == 3


@pytest.mark.slow
def test_recovered_grid_dynamics():
    mdp = worlds.gridworld('grid3')
    ta = worlds.task_automaton('coffee_stairs', mdp.label_set())
    episodes = conftest.simulate(mdp, ta, 34, 275)
    result = pipeline.learn_task_automaton(mdp, episodes, k=3)
    truth = conftest.ground_truth_chain(mdp, ta)

    chain = hmm_learner.learned_chain(result.params, mdp.labels)
    recovered = product_model.recover_mdp_probabilities(chain, threshold=0.01,
                                                        weights=result.train_report.occupancy)
    grid_chain = product_model.recover_mdp_probabilities(truth)
    assert np.abs(recovered - grid_chain).max() < 0.05


@pytest.mark.slow
def test_removes_carpet_in_office(office):
    mdp, book, carpet_book = office
    episodes = conftest.simulate(mdp, book, 40, 400)
    result = pipeline.learn_task_automaton(mdp, episodes, k=2)
    carpet = automata.make_label('carpet')
    assert carpet not in result.debias_report.kept_labels
    assert pipeline.attainable_counterexample(result.automaton, book, mdp) is None
    assert pipeline.attainable_counterexample(result.automaton, carpet_book, mdp) is None


@pytest.mark.slow
def test_spatial_initialisation_is_faster_than_uniform():
    rows = {init: [common.main('grid3', 'coffee_stairs', seed, 34, 275, 3, init) for seed in range(3)]
            for init in ('uniform', 'spatial')}
    for init, results in rows.items():
        for result in results:
            assert result['error'] == '', (init, result['seed'], result['error'])
            assert result['converged']
    summaries = {init: common.summarise(results) for init, results in rows.items()}
    assert summaries['spatial']['mean_wall_time'] < summaries['uniform']['mean_wall_time']
