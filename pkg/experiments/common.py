import configparser
import json
import numpy as np
import os
import pathlib
import random
import statistics
import time
import torch
from tasklearn import automata
from tasklearn import formats
from tasklearn import mdp_env
from tasklearn import pipeline
from tasklearn import product_model
from tasklearn import worlds


here = pathlib.Path(__file__).resolve().parent


# Hyperparameter defaults, for the 3x3 grid with the 3 state task.
defaults = {'grid': 'grid3',
            'task': 'coffee_stairs',
            'episode_len': 34,
            'n_episodes': 275,
            'seed': 0,
            'k': 3,
            'init': 'spatial',
            'tol': 1e-6,
            'max_iters': 20000,
            'epsilon_scale': 1.0,
            'threshold': 0.01,
            'observation': 'state',
            'learn_emission': False,
            'structure': 'product',
            'n_jobs': 1,
            'runs': 3}

_config_sections = {'grid': ('grid',),
                    'task': ('task',),
                    'simulate': ('episode_len', 'n_episodes', 'seed', 'n_jobs'),
                    'learn': ('k', 'init', 'tol', 'max_iters', 'epsilon_scale', 'observation', 'learn_emission',
                              'structure'),
                    'distill': ('threshold',),
                    'bench': ('runs', 'n_jobs')}


def handle_seeds(seed):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    return seed + 1


def load_config(path):
    """Reads a config file of [section] headers and key = value lines into a flat dict of typed values."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as f:
            parser.read_file(f)
    except OSError as e:
        raise formats.FormatError(path, 0, "cannot read config ({})".format(e.strerror)) from e
    except configparser.Error as e:
        raise formats.FormatError(path, getattr(e, 'lineno', 0), e.message) from e

    out = {}
    for section in parser.sections():
        if section not in _config_sections:
            raise formats.FormatError(path, 0, "unknown section [{}]".format(section))
        for key, value in parser.items(section):
            if key not in _config_sections[section]:
                raise formats.FormatError(path, 0, "unknown key '{}' in section [{}]".format(key, section))
            try:
                if isinstance(defaults[key], bool):
                    value = parser.getboolean(section, key)
                elif isinstance(defaults[key], int):
                    value = int(value)
                elif isinstance(defaults[key], float):
                    value = float(value)
            except ValueError as e:
                raise formats.FormatError(path, 0, "bad value for '{}' in section [{}]: {}".format(key, section,
                                                                                                   e)) from e
            out[key] = value
    return out


def resolve(args, config, *keys):
    """Flag values override config values, which override the defaults."""
    out = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key, defaults[key])
        out[key] = value
    return out


def get_grid(grid):
    """A built-in gridworld name, or the path to a grid file. Built-in names take precedence over files."""
    if grid in worlds.grid_names():
        return worlds.gridworld(grid)
    if not os.path.exists(grid):
        raise ValueError("{!r} is neither a built-in gridworld ({}) nor a grid file."
                         "".format(grid, worlds.grid_names()))
    return formats.read_grid(grid)


def get_task(task, mdp):
    """A built-in task name, or the path to an automaton file. Completed with self-loops over the
    grid's labels. Built-in names take precedence over files."""
    if task in worlds.task_names():
        ta = worlds.task_automaton(task, mdp.label_set())
    elif os.path.exists(task):
        ta = formats.read_automaton(task)
    else:
        raise ValueError("{!r} is neither a built-in task ({}) nor an automaton file."
                         "".format(task, worlds.task_names()))
    return automata.complete(ta, policy='loop', alphabet=mdp.label_set())


def simulate(mdp, hidden_ta, episode_len, n_episodes, seed, n_jobs=1):
    return mdp_env.simulate_episodes(mdp, hidden_ta, mdp_env.uniform_random_policy(mdp), episode_len, n_episodes,
                                     seed, n_jobs=n_jobs)


def is_correct(automaton, hidden_ta, mdp):
    """Whether a learned automaton matches the MDP-restricted hidden automaton on every attainable trace."""
    reference = product_model.mdp_restricted_ta(mdp, hidden_ta)
    return pipeline.attainable_counterexample(automaton, reference, mdp) is None


def assert_not_done(result_folder, result_subfolder, n_done=1, seed=None):
    folder = here / 'results' / result_folder / result_subfolder
    if os.path.isdir(folder):
        num_files = sum(1 for x in os.listdir(folder) if not x.startswith('.'))
        if seed is not None and num_files > seed:
            return False
        return num_files < n_done
    else:
        return True


class _TensorEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, (torch.Tensor, np.ndarray)):
            return o.tolist()
        if isinstance(o, (np.integer, np.floating)):
            return o.item()
        return super(_TensorEncoder, self).default(o)


def save_results(result_folder, result_subfolder, results):
    loc = here / 'results' / result_folder / result_subfolder
    loc.mkdir(parents=True, exist_ok=True)
    num = -1
    for filename in os.listdir(loc):
        try:
            num = max(num, int(filename))
        except ValueError:
            pass
    num += 1
    with formats.atomic_write(loc / str(num)) as f:
        json.dump(results, f, cls=_TensorEncoder)
    return loc


def main(grid, task, seed, episode_len, n_episodes, k, init, tol=1e-6, max_iters=20000, threshold=0.01,
         epsilon_scale=1.0, observation='state', learn_emission=False, structure='product', n_jobs=1,
         result_folder=None, result_subfolder=''):
    """Runs the whole pipeline once: simulate, learn, distill, de-bias, and check against the hidden automaton.

    Returns a dict of results. If `result_folder` is given the results are also saved under experiments/results.
    """
    mdp = get_grid(grid)
    hidden_ta = get_task(task, mdp)
    episodes = simulate(mdp, hidden_ta, episode_len, n_episodes, seed, n_jobs)

    results = {'grid': grid, 'task': task, 'seed': seed, 'episode_len': episode_len, 'n_episodes': n_episodes,
               'k': k, 'init': init, 'structure': structure, 'tol': tol, 'threshold': threshold,
               'reward_fraction': mdp_env.reward_fraction(episodes)}
    start = time.perf_counter()
    try:
        result = pipeline.learn_task_automaton(mdp, episodes, k=k, init=init, seed=seed, tol=tol,
                                               max_iters=max_iters, threshold=threshold,
                                               epsilon_scale=epsilon_scale, observation=observation,
                                               learn_emission=learn_emission, structure=structure,
                                               n_jobs=n_jobs)
    except (ValueError, RuntimeError) as e:
        results.update(error='{}: {}'.format(type(e).__name__, e), correct=False,
                       wall_time=time.perf_counter() - start)
    else:
        report = result.train_report
        results.update(error='',
                       wall_time=report.wall_time,
                       iterations=report.iterations,
                       converged=report.converged,
                       final_delta=report.final_delta,
                       distilled_states=len(result.distilled.states),
                       learned_states=len(result.automaton.states),
                       removed_labels=[automata.format_label(label) for label in result.debias_report.removed_labels],
                       correct=is_correct(result.automaton, hidden_ta, mdp),
                       automaton=formats.format_automaton(result.automaton))

    if result_folder is not None:
        save_results(result_folder, result_subfolder, results)
    return results


def summarise(rows):
    """Mean and standard deviation of the wall times of repeated runs of one configuration."""
    times = [row['wall_time'] for row in rows]
    return {'runs': len(rows),
            'mean_wall_time': statistics.mean(times),
            'std_wall_time': statistics.stdev(times) if len(times) > 1 else 0.,
            'mean_iterations': statistics.mean(row.get('iterations', 0) for row in rows),
            'converged_runs': sum(bool(row.get('converged', False)) for row in rows),
            'correct_runs': sum(bool(row['correct']) for row in rows),
            'errors': ' | '.join(row['error'] for row in rows if row['error'])}
