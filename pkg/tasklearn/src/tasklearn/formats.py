"""Text formats: grid descriptions, episode files, automata, Graphviz DOT, CSV matrices and key = value reports.

Grid file::

    # comments and blank lines are ignored
    size 3 3              # width height
    initial 0 0           # row col of the initial cell; row 0 is the bottom row
    .      .      stairs  # the first grid line is the TOP row
    .      .      .
    .      coffee .

Each cell is '.' (the empty label) or a label token; a label with several propositions joins them with '+'.

Episode file: one record per episode, made of three whitespace-separated rows of equal length (state indices, label
tokens, 0/1 rewards). Records may be separated by blank lines or '#' comments.

Automaton file::

    states q0 q1 q2
    initial q0
    accepting q2
    alphabet . coffee stairs
    q0 coffee q1
    q1 stairs q2

States are written with `str`, so they read back as strings.
"""
import contextlib
import csv
import io
import numpy as np
import os
import pathlib
import shutil
import tempfile

from . import automata
from . import mdp_env


class FormatError(ValueError):
    """Raised on malformed input files. The message starts with path:line."""

    def __init__(self, path, line, message):
        super(FormatError, self).__init__("{}:{}: {}".format(path, line, message))
        self.path = path
        self.line = line


@contextlib.contextmanager
def atomic_write(path):
    """Opens a temporary file next to `path` for writing, and moves it into place only if the block succeeds."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(dir=path.parent, prefix='.' + path.name + '.', suffix='.tmp')
    try:
        with os.fdopen(handle, 'w', newline='') as f:
            yield f
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.remove(temp_name)
        raise


@contextlib.contextmanager
def staged_directory(out_dir):
    """Yields a temporary directory next to `out_dir`. If the block succeeds, every file written to it is moved into
    `out_dir` (created if needed); otherwise none of them are. Either way the temporary directory is removed."""
    out_dir = pathlib.Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = pathlib.Path(tempfile.mkdtemp(dir=out_dir.parent, prefix='.' + out_dir.name + '.'))
    try:
        yield staging
        out_dir.mkdir(exist_ok=True)
        for path in sorted(staging.iterdir()):
            os.replace(path, out_dir / path.name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _content_lines(path):
    """Yields (line_number, tokens) for every non-blank line, with '#' comments stripped."""
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as e:
        raise FormatError(path, 0, "cannot read file ({})".format(e.strerror)) from e
    for number, line in enumerate(lines, start=1):
        tokens = line.split('#', 1)[0].split()
        if tokens:
            yield number, tokens


def _parse_label(path, number, token):
    try:
        return automata.parse_label(token)
    except ValueError as e:
        raise FormatError(path, number, str(e)) from e


def _parse_int(path, number, token, what):
    try:
        return int(token)
    except ValueError:
        raise FormatError(path, number, "expected an integer {}, got {!r}".format(what, token)) from None


###################
# Grids
###################


def read_grid(path):
    """Reads a grid description file into a LabelledMdp."""
    header = {}
    rows = []
    for number, tokens in _content_lines(path):
        keyword = tokens[0]
        if keyword in ('size', 'initial') and not rows:
            if len(tokens) != 3:
                raise FormatError(path, number, "'{}' takes two integers".format(keyword))
            header[keyword] = (number, _parse_int(path, number, tokens[1], keyword),
                               _parse_int(path, number, tokens[2], keyword))
        else:
            rows.append((number, tokens))
    if 'size' not in header:
        raise FormatError(path, 1, "missing 'size <width> <height>' header")
    _, width, height = header['size']
    if len(rows) != height:
        line = rows[-1][0] if rows else header['size'][0]
        raise FormatError(path, line, "expected {} grid rows, got {}".format(height, len(rows)))

    labelled_cells = {}
    for index, (number, tokens) in enumerate(rows):
        if len(tokens) != width:
            raise FormatError(path, number, "expected {} cells, got {}".format(width, len(tokens)))
        row = height - 1 - index
        for col, token in enumerate(tokens):
            labelled_cells[row, col] = _parse_label(path, number, token)
    initial_line, *initial_cell = header.get('initial', (header['size'][0], 0, 0))
    try:
        return mdp_env.build_gridworld(width, height, labelled_cells, tuple(initial_cell))
    except mdp_env.GridError as e:
        raise FormatError(path, initial_line, str(e)) from e


def format_grid(mdp):
    lines = ['size {} {}'.format(mdp.width, mdp.height),
             'initial {} {}'.format(*mdp.cell(mdp.initial_state))]
    tokens = [automata.format_label(label) for label in mdp.labels]
    column_width = max(len(token) for token in tokens)
    for row in reversed(range(mdp.height)):
        cells = tokens[row * mdp.width:(row + 1) * mdp.width]
        lines.append(' '.join(token.ljust(column_width) for token in cells).rstrip())
    return '\n'.join(lines) + '\n'


def write_grid(path, mdp):
    with atomic_write(path) as f:
        f.write(format_grid(mdp))


###################
# Episodes
###################


def write_episodes(path, episodes):
    with atomic_write(path) as f:
        for index, episode in enumerate(episodes):
            columns = [(str(state), automata.format_label(label), str(reward))
                       for state, label, reward in zip(episode.states, episode.trace, episode.rewards)]
            widths = [max(len(token) for token in column) for column in columns]
            f.write('# episode {}\n'.format(index))
            for row in range(3):
                f.write(' '.join(column[row].ljust(width) for column, width in zip(columns, widths)).rstrip() + '\n')


def read_episodes(path, mdp=None):
    """Reads an episode file. If `mdp` is given, every trace is checked against its labelling."""
    lines = list(_content_lines(path))
    if len(lines) % 3 != 0:
        raise FormatError(path, lines[-1][0], "episode records have three rows; found a trailing partial record")
    episodes = []
    for start in range(0, len(lines), 3):
        (state_line, state_tokens), (trace_line, trace_tokens), (reward_line, reward_tokens) = lines[start:start + 3]
        if not len(state_tokens) == len(trace_tokens) == len(reward_tokens):
            raise FormatError(path, state_line, "the three rows of an episode record must have the same length")
        states = [_parse_int(path, state_line, token, 'state') for token in state_tokens]
        trace = [_parse_label(path, trace_line, token) for token in trace_tokens]
        rewards = [_parse_int(path, reward_line, token, 'reward') for token in reward_tokens]
        try:
            episode = mdp_env.Episode(states, trace, rewards)
            if mdp is not None:
                episode.check_labelling(mdp)
        except ValueError as e:
            raise FormatError(path, state_line, str(e)) from e
        episodes.append(episode)
    return episodes


###################
# Automata
###################


def format_automaton(ta):
    lines = ['states ' + ' '.join(str(state) for state in ta.states),
             'initial {}'.format(ta.initial),
             'accepting ' + ' '.join(str(state) for state in ta.states if state in ta.accepting),
             'alphabet ' + ' '.join(automata.format_label(label) for label in automata.sort_labels(ta.alphabet))]
    lines.extend('{} {} {}'.format(source, automata.format_label(label), target)
                 for source, label, target in ta.edges())
    return '\n'.join(line.rstrip() for line in lines) + '\n'


def write_automaton(path, ta):
    with atomic_write(path) as f:
        f.write(format_automaton(ta))


def read_automaton(path):
    """Reads a TaskAutomaton. States not listed in a 'states' line are collected from the transitions."""
    states = []
    header = {}
    transitions = {}
    first_line = 1
    for number, tokens in _content_lines(path):
        keyword = tokens[0]
        if keyword == 'states':
            states.extend(token for token in tokens[1:] if token not in states)
        elif keyword in ('initial', 'accepting', 'alphabet'):
            header[keyword] = (number, tokens[1:])
        elif len(tokens) == 3:
            source, symbol, target = tokens
            label = _parse_label(path, number, symbol)
            if transitions.get((source, label), target) != target:
                raise FormatError(path, number, "second transition from {} on {}; automata must be deterministic"
                                                "".format(source, symbol))
            transitions[source, label] = target
            states.extend(state for state in (source, target) if state not in states)
        else:
            raise FormatError(path, number, "expected 'source label target' or a header line")
    for keyword in ('initial', 'alphabet'):
        if keyword not in header:
            raise FormatError(path, first_line, "missing '{}' line".format(keyword))
    initial_line, initial = header['initial']
    if len(initial) != 1:
        raise FormatError(path, initial_line, "'initial' takes exactly one state")
    if initial[0] not in states:
        states.insert(0, initial[0])
    alphabet_line, alphabet_tokens = header['alphabet']
    alphabet = [_parse_label(path, alphabet_line, token) for token in alphabet_tokens]
    accepting = header.get('accepting', (first_line, []))[1]
    try:
        return automata.TaskAutomaton(states, initial[0], alphabet, transitions, accepting)
    except ValueError as e:
        raise FormatError(path, first_line, str(e)) from e


def _gvquote(s):
    return '"{}"'.format(str(s).replace('"', r'\"'))


def _dot_edges(edges):
    grouped = {}
    for source, label, target in edges:
        grouped.setdefault((source, target), []).append(automata.format_label(label))
    for (source, target), labels in grouped.items():
        yield '  {} -> {} [label={}];\n'.format(_gvquote(source), _gvquote(target), _gvquote(', '.join(labels)))


def automaton_to_dot(automaton, name='automaton', state_names=str):
    """Produces a Graphviz description of a TaskAutomaton or Nfa as an iterable of strings.

    Accepting states are drawn as double circles; parallel edges are drawn once, with their labels joined.
    """
    yield 'digraph {} {{\n'.format(_gvquote(name))
    yield '  rankdir=LR;\n'
    yield '  __start [shape=point];\n'
    for state in automaton.states:
        shape = 'doublecircle' if state in automaton.accepting else 'circle'
        yield '  {} [shape={}];\n'.format(_gvquote(state_names(state)), shape)
    yield '  __start -> {};\n'.format(_gvquote(state_names(automaton.initial)))
    yield from _dot_edges((state_names(source), label, state_names(target))
                          for source, label, target in automaton.edges())
    yield '}\n'


def partition_to_dot(nfa, partition, name='lumping'):
    """Graphviz description of an NFA with one cluster per Cone Lumping class."""
    yield 'digraph {} {{\n'.format(_gvquote(name))
    yield '  rankdir=LR;\n'
    for class_id in range(partition.num_classes):
        yield '  subgraph cluster_{} {{\n'.format(class_id)
        yield '    label={};\n'.format(_gvquote('class {}'.format(class_id)))
        for state in partition.members(class_id):
            shape = 'doublecircle' if state in nfa.accepting else 'circle'
            yield '    {} [shape={}];\n'.format(_gvquote(state), shape)
        yield '  }\n'
    yield from _dot_edges(nfa.edges())
    yield '}\n'


def write_dot(path, lines):
    with atomic_write(path) as f:
        f.writelines(lines)


###################
# Matrices and reports
###################


def write_matrix_csv(path, matrix, names):
    """Writes a square matrix with a header row of state names. Values are written with full precision."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (len(names), len(names)):
        raise ValueError("Matrix of shape {} does not match {} names.".format(matrix.shape, len(names)))
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(names)
        for row in matrix:
            writer.writerow([repr(float(value)) for value in row])


def read_matrix_csv(path):
    """Reads a matrix written by `write_matrix_csv`. Returns (names, matrix)."""
    try:
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise FormatError(path, 0, "cannot read file ({})".format(e.strerror)) from e
    if not rows:
        raise FormatError(path, 1, "empty matrix file")
    names = rows[0]
    values = []
    for number, row in enumerate(rows[1:], start=2):
        if len(row) != len(names):
            raise FormatError(path, number, "expected {} values, got {}".format(len(names), len(row)))
        try:
            values.append([float(value) for value in row])
        except ValueError as e:
            raise FormatError(path, number, str(e)) from e
    if len(values) != len(names):
        raise FormatError(path, len(rows), "expected {} rows, got {}".format(len(names), len(values)))
    return names, np.array(values)


def format_report(mapping):
    out = io.StringIO()
    for key, value in mapping.items():
        if isinstance(value, float):
            value = repr(value)
        out.write('{} = {}\n'.format(key, value))
    return out.getvalue()


def write_report(path, mapping):
    with atomic_write(path) as f:
        f.write(format_report(mapping))


def read_report(path):
    out = {}
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as e:
        raise FormatError(path, 0, "cannot read file ({})".format(e.strerror)) from e
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        if not sep:
            raise FormatError(path, number, "expected 'key = value'")
        out[key.strip()] = value.strip()
    return out
