import csv
import json
import math
import os
import pathlib
import statistics
import sys


here = pathlib.Path(__file__).resolve().parent


def get(foldername, key='wall_time'):
    for filename in sorted(os.listdir(foldername)):
        if not filename.startswith('.'):
            with open(foldername / filename, 'r') as f:
                content = json.load(f)
            yield content[key]


def _from_folder(result_folder, key):
    """Reads experiments/results/<result_folder>/<grid>-<setting>/<run> files."""
    values = {}
    for foldername in sorted(os.listdir(result_folder)):
        grid, _, setting = foldername.partition('-')
        values.setdefault(grid, {})[setting] = list(get(result_folder / foldername, key))
    return values


def _from_bench_csv(path, key):
    """Reads a CSV written by `gridworlds.py bench`; each row already holds a mean over runs."""
    values = {}
    with open(path, newline='') as f:
        for row in csv.DictReader(f):
            setting = '{}-{}'.format(row['task'], row['init'])
            values.setdefault(row['grid'], {})[setting] = [float(row['mean_' + key])]
    return values


def main(source, key='wall_time'):
    path = pathlib.Path(source)
    if path.suffix == '.csv':
        values = _from_bench_csv(path, key)
    else:
        values = _from_folder(here / 'results' / source, key)

    means = {grid: {} for grid in values}
    stds = {grid: {} for grid in values}
    min_num_observations = math.inf
    for grid, settings in values.items():
        for setting, value in settings.items():
            min_num_observations = min(min_num_observations, len(value))
            means[grid][setting] = statistics.mean(value)
            if len(value) > 1:
                stds[grid][setting] = statistics.stdev(value)

    headings = {}  # Used as an ordered set here
    for mean in means.values():
        for setting in mean:
            headings[setting] = None

    print('Num observations: ' + str(min_num_observations))
    grid_column_width = max(len(grid) for grid in means) + 1
    column_width = max(max(len(heading) for heading in headings), 16)
    print(' ' * grid_column_width, end='')
    for heading in headings:
        print('| {{:{}}} '.format(column_width).format(heading), end='')
    print('')
    print('-' * grid_column_width, end='')
    for _ in headings:
        print('+' + '-' * (column_width + 2), end='')
    print('')
    for grid, mean in sorted(means.items()):
        std = stds[grid]
        print('{{:{}}}'.format(grid_column_width).format(grid), end='')
        for heading in headings:
            mean_print = '{:.1f}'.format(mean[heading]) if heading in mean else '  -  '
            std_print = '~{:.1f}'.format(std[heading]) if heading in std else ''
            print('| ' + (mean_print + std_print).rjust(column_width) + ' ', end='')
        print('')

    # the setting with the smallest mean for each grid
    fastest = {grid: min(mean, key=mean.get) for grid, mean in means.items() if mean}
    print('-' * grid_column_width, end='')
    for _ in headings:
        print('+' + '-' * (column_width + 2), end='')
    print('')
    print('{{:{}}}'.format(grid_column_width).format('Best'), end='')
    for heading in headings:
        wins = sum(1 for setting in fastest.values() if setting == heading)
        print('| {{:{}}} '.format(column_width).format(wins), end='')
    print('')

    return means, fastest, stds


if __name__ == '__main__':
    assert len(sys.argv) in (2, 3), "Usage: parse_results.py <results folder or bench CSV> [key]"
    means, fastest, stds = main(*sys.argv[1:])
