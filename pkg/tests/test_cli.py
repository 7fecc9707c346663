import csv
import json
import math

import pytest

from mixmap import cli
from mixmap.config import DEFAULTS
from mixmap.errors import ParameterError


@pytest.fixture
def run(tmp_path, monkeypatch):
    config = dict(DEFAULTS, log_dir=None, output_dir=str(tmp_path / 'output'),
                  ledger_path=str(tmp_path / 'runs.db'))
    monkeypatch.setattr(cli, 'load_config', lambda: dict(config))

    def invoke(*argv):
        return cli.main(list(argv))
    return invoke


@pytest.mark.parametrize('text, expected', [('3', [3]), ('1..4', [1, 2, 3, 4]), ('2,4,6', [2, 4, 6])])
def test_parse_levels(text, expected):
    assert cli.parse_levels(text) == expected


def test_parse_levels_rejects_garbage():
    with pytest.raises(ParameterError):
        cli.parse_levels('one..two')


def test_build_writes_map_document(run, tmp_path):
    out = tmp_path / 'map.json'
    assert run('build', '--n-max', '2', '--out', str(out)) == 0
    document = json.loads(out.read_text())
    assert document["lambda"] == '14'
    assert [row["M"] for row in document["levels"]] == [13, 47]


def test_build_default_output_folder(run, tmp_path):
    assert run('build', '--n-max', '1', '--format', 'csv') == 0
    assert (tmp_path / 'output' / 'map_lambda14_r1.csv').exists()


@pytest.mark.parametrize('argv', [
    ('build', '--lambda', '13'),
    ('build', '--r', '0'),
    ('build', '--lambda', 'fourteen'),
    ('build', '--format', 'dot'),
    ('measure', '--bins', '1'),
    ('entropy', '--p', '0', '--method', 'separated-local'),
    ('launch',),
])
def test_configuration_errors_exit_2(run, argv):
    assert run(*argv) == 2


def test_graph_dot(run, tmp_path):
    out = tmp_path / 'h1.dot'
    assert run('graph', '--subgraph', 'H', '--n', '1', '--out', str(out)) == 0
    assert out.read_text().count('shape=ellipse') == 14


def test_graph_csv_edges(run, tmp_path):
    out = tmp_path / 'g1.csv'
    assert run('graph', '--N', '1', '--format', 'csv', '--out', str(out)) == 0
    with open(out) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['source', 'target']
    assert ['Osc(1,1)', 'ScaledOsc(1,1)'] in rows


def test_entropy_subgraph_exact(run, tmp_path):
    out = tmp_path / 'h.json'
    assert run('entropy', '--method', 'subgraph-exact', '--n', '2', '--out', str(out)) == 0
    assert json.loads(out.read_text())["value_nats"] == pytest.approx(math.log(47) / 3)
    assert run('entropy', '--method', 'subgraph-exact', '--n', '1', '--bits', '--out', str(out)) == 0
    assert json.loads(out.read_text())["value_bits"] == pytest.approx(math.log2(13) / 2)


def test_entropy_loop_count(run, tmp_path):
    out = tmp_path / 'loops.json'
    assert run('entropy', '--method', 'loop-count', '--subgraph', 'H', '--n', '1',
               '--vertex', 'ScaledOsc(1,1)', '--length', '4', '--out', str(out)) == 0
    document = json.loads(out.read_text())
    assert document["details"]["count"] == '169'


def test_entropy_separated_upper_csv(run, tmp_path):
    out = tmp_path / 'upper.csv'
    assert run('entropy', '--method', 'separated-upper', '--n', '2', '--epsilon', '0.5',
               '--format', 'csv', '--out', str(out)) == 0
    assert out.read_text().startswith('parameter,value_nats')


def test_measure_histogram(run, tmp_path):
    out = tmp_path / 'mu.csv'
    assert run('measure', '--n', '2', '--bins', '10', '--format', 'csv', '--out', str(out)) == 0
    with open(out) as f:
        rows = list(csv.reader(f))
    assert len(rows) == 11
    assert rows[1][3] == '2/3'


def test_verify_writes_manifest_and_ledger(run, tmp_path):
    out = tmp_path / 'verify.json'
    code = run('verify', '--suite', 'partition', '--suite', 'periodic', '--n', '1..2',
               '--n-max', '2', '--N', '1', '--out', str(out))
    assert code == 0
    manifest = json.loads(out.read_text())
    assert manifest["passed"] is True
    assert [suite["name"] for suite in manifest["suites"]] == ['partition', 'periodic_orbits']
    assert (tmp_path / 'runs.db').exists()


def test_verify_measure_suite(run, tmp_path):
    out = tmp_path / 'verify.json'
    assert run('verify', '--suite', 'measure', '--n', '2..3', '--n-max', '1', '--N', '1',
               '--out', str(out)) == 0
    assert len(json.loads(out.read_text())["suites"]) == 2


def test_build_writes_samples(run, tmp_path):
    out = tmp_path / 'map.json'
    assert run('build', '--n-max', '2', '--samples', '9', '--out', str(out)) == 0
    with open(tmp_path / 'map_samples.csv') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['x', 'f', 'df', 'piece']
    assert len(rows) == 10
    assert run('build', '--samples', '1') == 2
