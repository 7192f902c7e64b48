import json

import pandas as pd
import pytest

from main import main
from backend.utils.DataProcessor import read_edge_list
from backend.utils.config import TRACE_COLUMNS


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / 'gen'
    assert main(['-q', 'generate', '--graph-type', 'random', '--p', '6', '--n', '40', '--seed', '1',
                 '--out', str(out)]) == 0
    return out


def test_generate(capsys, generated):
    assert {p.name for p in generated.iterdir()} == {'truth.edges', 'data.csv', 'data.spec.json'}
    assert read_edge_list(generated / 'truth.edges').n_edges == 6
    assert len(pd.read_csv(generated / 'data.csv')) == 40
    assert 's0=6' in capsys.readouterr().out


def test_learn_writes_edges_and_trace(generated, tmp_path):
    edges, trace = tmp_path / 'est.edges', tmp_path / 'trace.csv'
    assert main(['-q', 'learn', str(generated / 'data.csv'), '--spec', str(generated / 'data.spec.json'),
                 '--sweeps', '2', '--out', str(edges), '--trace', str(trace)]) == 0
    assert read_edge_list(edges).p == 6
    assert tuple(pd.read_csv(trace).columns) == TRACE_COLUMNS


def test_learn_hc_to_stdout(capsys, generated):
    capsys.readouterr()
    assert main(['-q', 'learn', str(generated / 'data.csv'), '--method', 'hc']) == 0
    assert capsys.readouterr().out.startswith('p 6\n')


def test_evaluate(generated, tmp_path, capsys):
    truth = str(generated / 'truth.edges')
    table = tmp_path / 'metrics.csv'
    assert main(['evaluate', truth, truth, '--out', str(table)]) == 0
    assert 'JI' in capsys.readouterr().out
    row = pd.read_csv(table).iloc[0]
    assert row['JI'] == 1.0
    assert row['SHD'] == 0


def test_experiment_with_config_and_overrides(tmp_path, capsys):
    config = tmp_path / 'cfg.json'
    config.write_text(json.dumps({'graph_type': 'random', 'p': 5, 'n': 20, 'replicates': 1,
                                  'mode': 'sweep-lambda1', 'hyperparams': {'sweeps': 2}}))
    out = tmp_path / 'run'
    assert main(['-q', 'experiment', '--config', str(config), '--values', '1.0', '--seed', '3',
                 '--out', str(out)]) == 0
    assert len(pd.read_csv(out / 'aggregate.csv')) == 1
    assert json.loads((out / 'config.json').read_text())['seed'] == 3
    assert 'results:' in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ['frobnicate'], ['learn'], ['generate', '--p', '6']])
def test_usage_errors(argv):
    assert main(argv) == 1


def test_invalid_hyperparameter(generated):
    assert main(['-q', 'learn', str(generated / 'data.csv'), '--gamma', '-1']) == 1


def test_learn_with_path_matrix_source(generated, tmp_path):
    edges = tmp_path / 'est.edges'
    assert main(['-q', 'learn', str(generated / 'data.csv'), '--sweeps', '2', '--pm-source', 'extracted',
                 '--loss-scale', 'sqrt', '--out', str(edges)]) == 0
    assert read_edge_list(edges).p == 6
    assert main(['-q', 'learn', str(generated / 'data.csv'), '--pm-source', 'cyclic']) == 1


def test_bad_generate_config(tmp_path):
    assert main(['-q', 'generate', '--graph-type', 'bipartite', '--p', '4', '--out', str(tmp_path)]) == 1


def test_missing_data_file(tmp_path):
    assert main(['-q', 'learn', str(tmp_path / 'absent.csv')]) == 2


def test_node_count_mismatch(tmp_path):
    (tmp_path / 'a.edges').write_text("p 3\n0 1\n")
    (tmp_path / 'b.edges').write_text("p 4\n0 1\n")
    assert main(['evaluate', str(tmp_path / 'a.edges'), str(tmp_path / 'b.edges')]) == 2
