import numpy as np
import pytest

from tasklearn import automata
from tasklearn import distiller
from tasklearn import formats
from tasklearn import product_model
from tasklearn import worlds

import conftest


GRID = """\
# the lumping world
size 3 3
initial 0 0
stairs . .
.      . coffee   # right column
.      . coffee
"""


def test_read_grid(tmp_path):
    path = tmp_path / 'grid.txt'
    path.write_text(GRID)
    mdp = formats.read_grid(path)
    assert mdp == worlds.gridworld('lumping')
    formats.write_grid(tmp_path / 'copy.txt', mdp)
    assert formats.read_grid(tmp_path / 'copy.txt') == mdp


@pytest.mark.parametrize('text, line', [
    ('size 3 3\n. . .\n. . .\n', 3),
    ('size 3 2\n. . .\n. .\n', 3),
    ('size 3\n. . .\n', 1),
    ('size 2 1\ninitial 0 5\n. .\n', 2),
    ('size 1 1\ncoffee+\n', 2),
])
def test_bad_grid(tmp_path, text, line):
    path = tmp_path / 'grid.txt'
    path.write_text(text)
    with pytest.raises(formats.FormatError) as excinfo:
        formats.read_grid(path)
    assert excinfo.value.line == line
    assert str(excinfo.value).startswith('{}:{}: '.format(path, line))


def test_missing_file(tmp_path):
    with pytest.raises(formats.FormatError):
        formats.read_grid(tmp_path / 'nothing.txt')


def test_episodes(tmp_path, lumping):
    mdp, ta = lumping
    episodes = conftest.simulate(mdp, ta, 8, 5)
    path = tmp_path / 'episodes.txt'
    formats.write_episodes(path, episodes)
    assert formats.read_episodes(path, mdp) == episodes
    assert path.read_text().startswith('# episode 0\n')

    formats.write_episodes(tmp_path / 'empty.txt', [])
    assert formats.read_episodes(tmp_path / 'empty.txt') == []


def test_bad_episodes(tmp_path, lumping):
    mdp, _ = lumping
    path = tmp_path / 'episodes.txt'
    path.write_text('0 1\n. .\n0 0\n0 1\n. coffee\n0 0\n')
    with pytest.raises(formats.FormatError) as excinfo:
        formats.read_episodes(path, mdp)
    assert excinfo.value.line == 4
    path.write_text('0 1\n. .\n')
    with pytest.raises(formats.FormatError):
        formats.read_episodes(path)


def test_automaton(tmp_path, lumping):
    _, ta = lumping
    path = tmp_path / 'ta.txt'
    formats.write_automaton(path, ta)
    text = path.read_text()
    assert 'q0 coffee q1\n' in text
    assert 'accepting q2\n' in text
    assert formats.read_automaton(path) == ta


def test_automaton_integer_states(tmp_path, lumping):
    mdp, ta = lumping
    distilled = distiller.distill_chain(conftest.ground_truth_chain(mdp, ta))
    path = tmp_path / 'ta.txt'
    formats.write_automaton(path, distilled)
    loaded = formats.read_automaton(path)
    assert loaded.states == tuple(str(state) for state in distilled.states)
    assert automata.language_equivalent(loaded, distilled)


def test_nondeterministic_automaton_file(tmp_path):
    path = tmp_path / 'ta.txt'
    path.write_text('initial p\nalphabet . a\np a q\np a r\n')
    with pytest.raises(formats.FormatError) as excinfo:
        formats.read_automaton(path)
    assert excinfo.value.line == 4


def test_dot(lumping):
    mdp, ta = lumping
    text = ''.join(formats.automaton_to_dot(ta, name='coffee_stairs'))
    assert text.startswith('digraph "coffee_stairs" {')
    assert '"q2" [shape=doublecircle];' in text
    assert '"q0" [shape=circle];' in text
    assert '__start -> "q0";' in text
    assert '"q0" -> "q1" [label="coffee"];' in text

    nfa = product_model.extract_nfa(conftest.ground_truth_chain(mdp, ta))
    partition = distiller.lump(nfa)
    clustered = ''.join(formats.partition_to_dot(nfa, partition))
    assert clustered.count('subgraph cluster_') == partition.num_classes


def test_matrix_csv(tmp_path):
    matrix = np.random.default_rng(0).dirichlet(np.ones(4), size=4)
    names = ['s0q0', 's1q0', 's0q1', 's1q1']
    path = tmp_path / 'transition.csv'
    formats.write_matrix_csv(path, matrix, names)
    loaded_names, loaded = formats.read_matrix_csv(path)
    assert loaded_names == names
    assert np.array_equal(loaded, matrix)
    with pytest.raises(ValueError):
        formats.write_matrix_csv(path, matrix, names[:3])


def test_report(tmp_path):
    path = tmp_path / 'report.txt'
    formats.write_report(path, {'iterations': 3, 'final_delta': 1e-7, 'converged': True})
    assert formats.read_report(path) == {'iterations': '3', 'final_delta': '1e-07', 'converged': 'True'}


def test_atomic_write_keeps_old_file(tmp_path):
    path = tmp_path / 'out.txt'
    path.write_text('old')
    with pytest.raises(RuntimeError):
        with formats.atomic_write(path) as f:
            f.write('new')
            raise RuntimeError
    assert path.read_text() == 'old'
    assert [p.name for p in tmp_path.iterdir()] == ['out.txt']


def test_staged_directory(tmp_path):
    out_dir = tmp_path / 'out'
    with formats.staged_directory(out_dir) as staging:
        (staging / 'a.txt').write_text('a')
        (staging / 'b.txt').write_text('b')
        assert not out_dir.exists()
    assert sorted(p.name for p in out_dir.iterdir()) == ['a.txt', 'b.txt']
    assert [p.name for p in tmp_path.iterdir()] == ['out']


def test_staged_directory_failure_writes_nothing(tmp_path):
    out_dir = tmp_path / 'out'
    with pytest.raises(RuntimeError):
        with formats.staged_directory(out_dir) as staging:
            (staging / 'a.txt').write_text('a')
            raise RuntimeError
    assert list(tmp_path.iterdir()) == []

    out_dir.mkdir()
    (out_dir / 'a.txt').write_text('old')
    with pytest.raises(RuntimeError):
        with formats.staged_directory(out_dir) as staging:
            (staging / 'a.txt').write_text('new')
            raise RuntimeError
    assert (out_dir / 'a.txt').read_text() == 'old'
    assert [p.name for p in tmp_path.iterdir()] == ['out']
