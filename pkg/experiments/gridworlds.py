import argparse
import csv
import joblib
import logging
import os
import pathlib
import sys
import torch
from tasklearn import automata
from tasklearn import debiasing
from tasklearn import distiller
from tasklearn import formats
from tasklearn import hmm_learner
from tasklearn import mdp_env
from tasklearn import pipeline
from tasklearn import product_model

import common

here = pathlib.Path(__file__).resolve().parent


# (grid, task, k, episode length, number of episodes), for the timing experiment over grid and automaton sizes.
experiment_1_table = (('grid3', 'coffee_stairs', 3, 34, 275),
                      ('grid3', 'coffee_couch_stairs', 4, 34, 275),
                      ('grid3', 'coffee_couch_tv_stairs', 5, 70, 500),
                      ('grid4', 'coffee_stairs', 3, 80, 500),
                      ('grid4', 'coffee_couch_stairs', 4, 90, 1000),
                      ('grid4', 'coffee_couch_tv_stairs', 5, 80, 1000),
                      ('grid5', 'coffee_stairs', 3, 85, 2000),
                      ('grid5', 'coffee_couch_stairs', 4, 100, 2000),
                      ('grid5', 'coffee_couch_tv_stairs', 5, 125, 2000))

# (grid, task, k, episode length, number of episodes), run under both initialisations.
experiment_2_table = (('grid3', 'coffee_stairs', 3, 34, 275),
                      ('grid4', 'coffee_stairs', 3, 80, 500),
                      ('grid5', 'coffee_stairs', 3, 85, 2000))

# Small enough to run in seconds; used to check the harness itself.
smoke_table = (('library', 'book', 2, 12, 40),)


def _bench_configs(preset):
    if preset == 'experiment_1':
        return [row + ('spatial',) for row in experiment_1_table]
    elif preset == 'experiment_2':
        return [row + (init,) for init in ('uniform', 'spatial') for row in experiment_2_table]
    elif preset == 'smoke':
        return [row + ('spatial',) for row in smoke_table]
    raise ValueError("Unknown bench preset {!r}.".format(preset))


###################
# Subcommands
###################


def cmd_simulate(args, config):
    values = common.resolve(args, config, 'grid', 'task', 'episode_len', 'n_episodes', 'seed', 'n_jobs')
    mdp = common.get_grid(values['grid'])
    hidden_ta = common.get_task(values['task'], mdp)
    episodes = common.simulate(mdp, hidden_ta, values['episode_len'], values['n_episodes'], values['seed'],
                               values['n_jobs'])
    formats.write_episodes(args.out, episodes)
    print('Simulated {} episodes of {} moves; {:.1%} of them reached reward.'
          ''.format(len(episodes), values['episode_len'], mdp_env.reward_fraction(episodes)))
    return 0


def cmd_learn(args, config):
    values = common.resolve(args, config, 'grid', 'k', 'init', 'tol', 'max_iters', 'seed', 'epsilon_scale',
                            'observation', 'learn_emission', 'n_jobs', 'structure')
    mdp = common.get_grid(values['grid'])
    block_size = pipeline.block_size_for(mdp, values['structure'])
    episodes = formats.read_episodes(args.episodes, mdp)
    if not episodes:
        raise ValueError("{} contains no episodes.".format(args.episodes))
    out_dir = pathlib.Path(args.out_dir)
    names = ['s{}q{}'.format(index % mdp.num_states, index // mdp.num_states)
             for index in range(values['k'] * mdp.num_states)]

    def checkpoint(iteration, params):
        formats.write_matrix_csv(out_dir / 'transition_{}.csv'.format(iteration), params.transition.numpy(), names)

    common.handle_seeds(values['seed'])
    init = hmm_learner.initial_params(mdp, values['k'], init=values['init'], seed=values['seed'],
                                      epsilon_scale=values['epsilon_scale'], observation=values['observation'])
    params, report = hmm_learner.train(init, pipeline.encode_episodes(mdp, episodes, values['observation']),
                                       tol=values['tol'], max_iters=values['max_iters'],
                                       learn_emission=values['learn_emission'], n_jobs=values['n_jobs'],
                                       verbose=args.verbose, checkpoint_every=args.checkpoint_every,
                                       checkpoint_fn=checkpoint, block_size=block_size)
    summary = report.as_dict()
    summary.update(k=values['k'], init=values['init'], observation=values['observation'],
                   structure=values['structure'])
    with formats.staged_directory(out_dir) as staging:
        formats.write_matrix_csv(staging / 'transition.csv', params.transition.numpy(), names)
        formats.write_report(staging / 'train_report.txt', summary)
    print(formats.format_report(summary), end='')
    return 0


def _load_params(path, mdp, observation='state'):
    names, transition = formats.read_matrix_csv(path)
    if transition.shape[0] % mdp.num_states != 0:
        raise formats.FormatError(path, 1, "{} hidden states do not form blocks of {} grid states"
                                           "".format(transition.shape[0], mdp.num_states))
    k = transition.shape[0] // mdp.num_states
    if observation == 'label':
        emission = hmm_learner.label_emission_matrix(k, mdp.labels)
    else:
        emission = hmm_learner.build_emission_matrix(k, mdp.num_states)
    try:
        return hmm_learner.HmmParams(transition, emission,
                                     hmm_learner.initial_distribution(transition.shape[0], mdp.initial_state))
    except ValueError as e:
        raise formats.FormatError(path, 1, str(e)) from e


def cmd_distill(args, config):
    values = common.resolve(args, config, 'grid')
    mdp = common.get_grid(values['grid'])
    params = _load_params(args.checkpoint, mdp)
    thresholds = args.threshold if args.threshold is not None else [config.get('threshold',
                                                                               common.defaults['threshold'])]
    chain = hmm_learner.learned_chain(params, mdp.labels)
    out_dir = pathlib.Path(args.out_dir)
    outputs = []
    for threshold in thresholds:
        suffix = '' if len(thresholds) == 1 else '_{}'.format(threshold)
        nfa = product_model.extract_nfa(chain, threshold)
        partition = distiller.lump(nfa)
        ta = automata.complete(distiller.quotient(nfa, partition), policy='loop')
        outputs.append((suffix, nfa, partition, ta))
        print('threshold {}: {} NFA states, {} edges, {} automaton states'
              ''.format(threshold, len(nfa.states), sum(1 for _ in nfa.edges()), len(ta.states)))
    # every threshold is processed before anything is written
    with formats.staged_directory(out_dir) as staging:
        for suffix, nfa, partition, ta in outputs:
            formats.write_dot(staging / 'nfa{}.dot'.format(suffix), formats.automaton_to_dot(nfa, 'nfa'))
            formats.write_dot(staging / 'classes{}.dot'.format(suffix), formats.partition_to_dot(nfa, partition))
            formats.write_dot(staging / 'ta{}.dot'.format(suffix), formats.automaton_to_dot(ta, 'ta'))
            formats.write_automaton(staging / 'ta{}.txt'.format(suffix), ta)
    return 0


def cmd_debias(args, config):
    mdp = common.get_grid(args.grid) if args.grid is not None else None
    ta = formats.read_automaton(args.ta)
    episodes = formats.read_episodes(args.episodes, mdp)
    report = debiasing.remove_environmental_bias_report(ta, episodes)
    with formats.staged_directory(args.out_dir) as staging:
        formats.write_automaton(staging / 'debiased.txt', report.automaton)
        formats.write_dot(staging / 'before.dot', formats.automaton_to_dot(ta, 'before'))
        formats.write_dot(staging / 'debiased.dot', formats.automaton_to_dot(report.automaton, 'debiased'))
        formats.write_report(staging / 'debias_report.txt', report.as_dict())
    print(formats.format_report(report.as_dict()), end='')
    return 0


def cmd_verify(args, config):
    ta = formats.read_automaton(args.ta)
    reference = formats.read_automaton(args.reference)
    if args.grid is not None:
        word = pipeline.attainable_counterexample(ta, reference, common.get_grid(args.grid))
    else:
        word = pipeline.counterexample(ta, reference)
    summary = {'equivalent': word is None,
               'counterexample': '-' if word is None else ' '.join(map(automata.format_label, word)) or '(empty)'}
    if args.out is not None:
        formats.write_report(args.out, summary)
    print(formats.format_report(summary), end='')
    return 0 if word is None else 1


def _bench_row(config, values, seeds):
    grid, task, k, episode_len, n_episodes, init = config
    rows = [common.main(grid, task, seed, episode_len, n_episodes, k, init, tol=values['tol'],
                        max_iters=values['max_iters'], threshold=values['threshold'],
                        epsilon_scale=values['epsilon_scale'], structure=values['structure'])
            for seed in seeds]
    row = {'grid': grid, 'task': task, 'k': k, 'init': init, 'episode_len': episode_len, 'n_episodes': n_episodes}
    row.update(common.summarise(rows))
    return row


def cmd_bench(args, config):
    values = common.resolve(args, config, 'runs', 'n_jobs', 'seed', 'tol', 'max_iters', 'threshold',
                            'epsilon_scale', 'structure')
    configs = _bench_configs(args.preset)
    seeds = [values['seed'] + run for run in range(values['runs'])]
    if values['n_jobs'] == 1:
        rows = [_bench_row(config, values, seeds) for config in configs]
    else:
        rows = joblib.Parallel(n_jobs=values['n_jobs'])(joblib.delayed(_bench_row)(config, values, seeds)
                                                        for config in configs)
    with formats.atomic_write(args.out) as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print('{grid} {task} {init}: {mean_wall_time:.2f}s (+- {std_wall_time:.2f}), '
              '{correct_runs}/{runs} correct'.format(**row))
    return 0


def cmd_run(args, config):
    values = common.resolve(args, config, 'grid', 'task', 'episode_len', 'n_episodes', 'seed', 'k', 'init', 'tol',
                            'max_iters', 'threshold', 'epsilon_scale', 'observation', 'learn_emission', 'structure',
                            'n_jobs')
    common.handle_seeds(values['seed'])
    mdp = common.get_grid(values['grid'])
    hidden_ta = common.get_task(values['task'], mdp)
    episodes = common.simulate(mdp, hidden_ta, values['episode_len'], values['n_episodes'], values['seed'],
                               values['n_jobs'])
    result = pipeline.learn_task_automaton(mdp, episodes, k=values['k'], init=values['init'], seed=values['seed'],
                                           tol=values['tol'], max_iters=values['max_iters'],
                                           threshold=values['threshold'], epsilon_scale=values['epsilon_scale'],
                                           observation=values['observation'],
                                           learn_emission=values['learn_emission'], structure=values['structure'],
                                           n_jobs=values['n_jobs'], verbose=args.verbose)
    summary = result.train_report.as_dict()
    summary.update(result.debias_report.as_dict())
    summary['reward_fraction'] = mdp_env.reward_fraction(episodes)
    summary['correct'] = common.is_correct(result.automaton, hidden_ta, mdp)

    names = ['s{}q{}'.format(index % mdp.num_states, index // mdp.num_states)
             for index in range(result.params.n_hidden)]
    with formats.staged_directory(args.out_dir) as staging:
        formats.write_episodes(staging / 'episodes.txt', episodes)
        formats.write_matrix_csv(staging / 'transition.csv', result.params.transition.numpy(), names)
        formats.write_automaton(staging / 'distilled.txt', result.distilled)
        formats.write_automaton(staging / 'learned.txt', result.automaton)
        formats.write_dot(staging / 'learned.dot', formats.automaton_to_dot(result.automaton, 'learned'))
        formats.write_report(staging / 'report.txt', summary)
    print(formats.format_report(summary), end='')
    return 0


###################
# Experiments
###################


def experiment_1(runs=3):
    """Time to convergence for varying grid and automaton sizes."""
    seed = 5394
    result_folder = 'experiment_1'
    for grid, task, k, episode_len, n_episodes in experiment_1_table:
        result_subfolder = '{}-{}'.format(grid, task)
        for run in range(runs):
            seed = common.handle_seeds(seed)
            if common.assert_not_done(result_folder, result_subfolder, n_done=runs, seed=run):
                print("Starting comparison: " + result_subfolder)
                common.main(grid, task, seed, episode_len, n_episodes, k, 'spatial', result_folder=result_folder,
                            result_subfolder=result_subfolder)


def experiment_2(runs=3):
    """Time to convergence under uniform and spatial initialisation."""
    seed = 5678
    result_folder = 'experiment_2'
    for grid, task, k, episode_len, n_episodes in experiment_2_table:
        for init in ('uniform', 'spatial'):
            result_subfolder = '{}-{}'.format(grid, init)
            for run in range(runs):
                seed = common.handle_seeds(seed)
                if common.assert_not_done(result_folder, result_subfolder, n_done=runs, seed=run):
                    print("Starting comparison: " + result_subfolder)
                    common.main(grid, task, seed, episode_len, n_episodes, k, init, result_folder=result_folder,
                                result_subfolder=result_subfolder)


def cmd_experiment(args, config):
    if not os.path.exists(here / 'results'):
        raise ValueError("Please make a folder or symlink at experiments/results to store results in.")
    {'experiment_1': experiment_1, 'experiment_2': experiment_2}[args.name](runs=args.runs or common.defaults['runs'])
    return 0


###################
# Command line
###################


def _positive_int(value):
    value = int(value)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1, got {}".format(value))
    return value


def _non_negative_int(value):
    value = int(value)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative, got {}".format(value))
    return value


def _bool(value):
    if value.lower() in ('1', 'true', 'yes', 'on'):
        return True
    if value.lower() in ('0', 'false', 'no', 'off'):
        return False
    raise argparse.ArgumentTypeError("expected a boolean, got {!r}".format(value))


def _add_simulate_flags(parser):
    parser.add_argument('--task', help="Built-in task name or automaton file.")
    parser.add_argument('--episode-len', dest='episode_len', type=_positive_int)
    parser.add_argument('--n-episodes', dest='n_episodes', type=_non_negative_int)


def _add_learn_flags(parser):
    parser.add_argument('--k', type=_positive_int, help="Guessed number of task automaton states.")
    parser.add_argument('--init', choices=('spatial', 'uniform'))
    parser.add_argument('--tol', type=float)
    parser.add_argument('--max-iters', dest='max_iters', type=_positive_int)
    parser.add_argument('--epsilon-scale', dest='epsilon_scale', type=float)
    parser.add_argument('--observation', choices=('state', 'label'))
    parser.add_argument('--learn-emission', dest='learn_emission', type=_bool)
    parser.add_argument('--structure', choices=('product', 'free'),
                        help="Re-estimate the transition matrix in product form, or freely.")


def get_parser():
    parser = argparse.ArgumentParser(description="Learn task automata from episodes in labelled gridworlds.")
    parser.add_argument('--verbose', action='store_true', help="Log progress.")
    subparsers = parser.add_subparsers(dest='command', required=True)

    def add(name, function, help):
        subparser = subparsers.add_parser(name, help=help)
        subparser.add_argument('--config', help="Config file with [section] headers and key = value lines.")
        subparser.add_argument('--seed', type=int)
        subparser.add_argument('--n-jobs', dest='n_jobs', type=int)
        subparser.set_defaults(function=function)
        return subparser

    simulate = add('simulate', cmd_simulate, "Generate episodes.")
    simulate.add_argument('--grid', help="Built-in grid name or grid file.")
    _add_simulate_flags(simulate)
    simulate.add_argument('--out', required=True, help="Episode file to write.")

    learn = add('learn', cmd_learn, "Learn the hidden product chain with Baum-Welch.")
    learn.add_argument('--grid')
    learn.add_argument('--episodes', required=True)
    _add_learn_flags(learn)
    learn.add_argument('--checkpoint-every', dest='checkpoint_every', type=_non_negative_int, default=0)
    learn.add_argument('--out-dir', dest='out_dir', required=True)

    distill = add('distill', cmd_distill, "Distil a task automaton from a learned transition matrix.")
    distill.add_argument('--grid')
    distill.add_argument('--checkpoint', required=True, help="Transition matrix CSV written by 'learn'.")
    distill.add_argument('--threshold', type=float, nargs='+', help="One or more edge thresholds.")
    distill.add_argument('--out-dir', dest='out_dir', required=True)

    debias = add('debias', cmd_debias, "Remove environmentally biased labels.")
    debias.add_argument('--ta', required=True)
    debias.add_argument('--episodes', required=True)
    debias.add_argument('--grid', help="Optionally check the episodes against this grid.")
    debias.add_argument('--out-dir', dest='out_dir', required=True)

    verify = add('verify', cmd_verify, "Compare two task automata. Exits with 1 if they differ.")
    verify.add_argument('--ta', required=True)
    verify.add_argument('--reference', required=True)
    verify.add_argument('--grid', help="Only compare on traces attainable in this grid.")
    verify.add_argument('--out')

    bench = add('bench', cmd_bench, "Time repeated runs of a table of configurations.")
    bench.add_argument('--preset', choices=('experiment_1', 'experiment_2', 'smoke'), default='experiment_2')
    bench.add_argument('--runs', type=_positive_int)
    bench.add_argument('--tol', type=float)
    bench.add_argument('--max-iters', dest='max_iters', type=_positive_int)
    bench.add_argument('--threshold', type=float)
    bench.add_argument('--epsilon-scale', dest='epsilon_scale', type=float)
    bench.add_argument('--structure', choices=('product', 'free'))
    bench.add_argument('--out', required=True, help="CSV file to write.")

    run = add('run', cmd_run, "Simulate, learn, distil and de-bias in one go.")
    run.add_argument('--grid')
    _add_simulate_flags(run)
    _add_learn_flags(run)
    run.add_argument('--threshold', type=float)
    run.add_argument('--out-dir', dest='out_dir', required=True)

    experiment = add('experiment', cmd_experiment, "Run a timing experiment, saving to experiments/results.")
    experiment.add_argument('name', choices=('experiment_1', 'experiment_2'))
    experiment.add_argument('--runs', type=_positive_int)
    return parser


def main(argv=None):
    args = get_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO)
    try:
        config = common.load_config(args.config) if args.config is not None else {}
        return args.function(args, config)
    except (ValueError, RuntimeError, OSError) as e:
        print('error: {}'.format(e), file=sys.stderr)
        return 1


if __name__ == '__main__':
    torch.set_num_threads(1)
    sys.exit(main())
