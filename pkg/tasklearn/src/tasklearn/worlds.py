"""Built-in gridworlds and task automata.

Layouts are written top row first, like grid files. The agent starts in the bottom-left cell.
"""
from . import automata
from . import mdp_env


_layouts = {
    # used by the timing experiments
    'grid3': """
        stairs tv     coffee
        carpet .      .
        .      couch  .
        """,
    'grid4': """
        stairs .      tv     coffee
        .      carpet .      .
        .      .      .      .
        .      couch  .      .
        """,
    'grid5': """
        stairs .      .      .      coffee
        .      .      tv     .      .
        .      carpet .      .      .
        .      .      .      couch  .
        .      .      .      .      .
        """,
    # coffee then stairs; two coffee cells make the product NFA nondeterministic
    'lumping': """
        stairs .      .
        .      .      coffee
        .      .      coffee
        """,
    # every path to the book crosses a carpet immediately before it
    'office': """
        .      stairs .      carpet book
        .      .      tv     .      carpet
        couch  .      .      .      .
        .      .      .      coffee .
        .      .      .      .      .
        """,
    'library': """
        .      carpet book
        .      .      carpet
        .      .      .
        """,
}

_tasks = {
    'coffee_stairs': ('coffee', 'stairs'),
    'coffee_couch_stairs': ('coffee', 'couch', 'stairs'),
    'coffee_couch_tv_stairs': ('coffee', 'couch', 'tv', 'stairs'),
    'book': ('book',),
    'carpet_book': ('carpet', 'book'),
}


def grid_names():
    return sorted(_layouts)


def task_names():
    return sorted(_tasks)


def parse_layout(layout, initial_cell=(0, 0)):
    """Builds a LabelledMdp from rows of label tokens, top row first."""
    rows = [line.split() for line in layout.strip().splitlines() if line.strip()]
    height = len(rows)
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise mdp_env.GridError("Every row of a layout must have {} cells.".format(width))
    labelled_cells = {(height - 1 - index, col): automata.parse_label(token)
                      for index, row in enumerate(rows) for col, token in enumerate(row)}
    return mdp_env.build_gridworld(width, height, labelled_cells, initial_cell)


def gridworld(name):
    try:
        layout = _layouts[name]
    except KeyError:
        raise ValueError("Unknown gridworld {!r}; choose from {}.".format(name, grid_names())) from None
    return parse_layout(layout)


def sequence_task(steps, alphabet):
    """The task automaton "visit steps[0], then steps[1], ..." over `alphabet`.

    State q_i moves to q_{i+1} on the label steps[i] and stays put on every other label. The last state is accepting
    (and absorbing).

    Arguments:
        steps: A sequence of labels or label tokens.
        alphabet: The labels of the automaton; must contain every step.
    """
    steps = [automata.parse_label(step) if isinstance(step, str) else frozenset(step) for step in steps]
    alphabet = frozenset(alphabet)
    missing = [automata.format_label(step) for step in steps if step not in alphabet]
    if missing:
        raise ValueError("Task steps {} are not in the alphabet.".format(missing))
    states = ['q{}'.format(index) for index in range(len(steps) + 1)]
    transitions = {(state, step): states[index + 1] for index, (state, step) in enumerate(zip(states, steps))}
    return automata.complete(automata.TaskAutomaton(states, states[0], alphabet, transitions, [states[-1]]))


def task_automaton(name, alphabet):
    """A named built-in task (see `task_names`) as a complete TaskAutomaton over `alphabet`."""
    try:
        steps = _tasks[name]
    except KeyError:
        raise ValueError("Unknown task {!r}; choose from {}.".format(name, task_names())) from None
    return sequence_task(steps, alphabet)
