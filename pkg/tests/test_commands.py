"""
Tests for the management commands: the files they write, their header lines,
and the exit codes of their failures.
"""

import json

import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

SMALL_CONFIG = {
    'seed': 3,
    'generation': {'n_devices': 200, 'computational_fraction': 0.2, 'n_latent_clusters': 3},
    'network': {'trunk_layers': [8], 'dropout_rate': 0.0},
    'training': {'epochs': 2, 'batch_size': 8},
    'clustering': {'k_max': 6, 'n_init': 2},
    'pipeline': {'training_tasks': 40, 'n_tasks': 20, 'k': 3},
    'baselines': {'GradientBoosting': {'n_estimators': 10}, 'MultiOutputWrapper': {'n_estimators': 10}},
}


def run(name, *args, config, out):
    call_command(name, *args, '--config', str(config), '--out', str(out))


@pytest.fixture(scope='module')
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp('config') / 'run.json'
    path.write_text(json.dumps(SMALL_CONFIG))
    return path


@pytest.fixture(scope='module')
def generated(tmp_path_factory, config_file):
    out = tmp_path_factory.mktemp('generated')
    run('generate', '--test-tasks', '20', config=config_file, out=out)
    return out


class TestGenerate:
    """Population and interaction files."""

    def test_writes_three_csvs_with_headers(self, generated):
        for name in ('devices.csv', 'interactions.csv', 'interactions_test.csv'):
            first = (generated / name).read_text().splitlines()[0]
            assert first.startswith('# edgecast ')
            assert 'seed=3' in first

    def test_row_counts(self, generated):
        assert len(pd.read_csv(generated / 'devices.csv', comment='#')) == 200
        assert len(pd.read_csv(generated / 'interactions.csv', comment='#')) == 40
        assert len(pd.read_csv(generated / 'interactions_test.csv', comment='#')) == 20

    def test_same_seed_same_bytes(self, generated, config_file, tmp_path):
        run('generate', '--test-tasks', '20', config=config_file, out=tmp_path)
        assert (tmp_path / 'devices.csv').read_bytes() == (generated / 'devices.csv').read_bytes()
        assert (tmp_path / 'interactions.csv').read_bytes() == (generated / 'interactions.csv').read_bytes()


class TestCluster:

    def test_writes_elbow_and_model(self, generated, config_file, tmp_path):
        run('cluster', str(generated / 'devices.csv'), config=config_file, out=tmp_path)
        elbow = pd.read_csv(tmp_path / 'elbow.csv', comment='#')
        assert list(elbow.columns) == ['k', 'distortion', 'silhouette']
        assert list(elbow['k']) == [2, 3, 4, 5, 6]
        document = json.loads((tmp_path / 'cluster_model.json').read_text())
        assert document['k_star'] in range(2, 7)
        assert document['meta']['seed'] == 3
        assert document['model']['k'] == document['k_star']

    def test_fixed_k(self, generated, config_file, tmp_path):
        call_command('cluster', str(generated / 'devices.csv'), '--k', '4', '--config', str(config_file),
                     '--out', str(tmp_path))
        assert json.loads((tmp_path / 'cluster_model.json').read_text())['model']['k'] == 4


class TestTrainAndEvaluate:

    def test_train_then_evaluate(self, generated, config_file, tmp_path):
        run('train', str(generated / 'interactions.csv'), config=config_file, out=tmp_path)
        history = pd.read_csv(tmp_path / 'history.csv', comment='#')
        assert list(history.columns) == ['epoch', 'l1', 'l2', 'l3', 'total', 'val_total']
        assert len(history) == 2

        run('evaluate', str(generated / 'interactions_test.csv'), str(tmp_path / 'model.json'),
            config=config_file, out=tmp_path)
        evaluation = pd.read_csv(tmp_path / 'evaluation.csv', comment='#')
        assert list(evaluation['metric']) == ['F1', 'F1', 'MSE']
        assert (tmp_path / 'evaluation.txt').read_text().startswith('# edgecast ')


@pytest.mark.slow
class TestCompareAndSimulate:

    def test_compare_in_k_fold_mode(self, generated, config_file, tmp_path):
        call_command('compare', str(generated / 'interactions.csv'), '--folds', '3', '--config', str(config_file),
                     '--out', str(tmp_path))
        comparison = pd.read_csv(tmp_path / 'comparison.csv', comment='#')
        assert len(comparison) == 8
        assert set(comparison['protocol']) == {'3-fold'}
        assert list(comparison['mse']) == sorted(comparison['mse'])
        assert 'HybridNetwork' in set(comparison['model'])

    def test_simulate(self, config_file, tmp_path):
        run('simulate', config=config_file, out=tmp_path)
        decisions = pd.read_csv(tmp_path / 'decisions.csv', comment='#')
        assert len(decisions) == 20
        assert (decisions['regret'] >= 1.0).all()
        summary = json.loads((tmp_path / 'scenario.json').read_text())['summary']
        assert summary['k'] == 3

    def test_simulate_twice_same_bytes(self, config_file, tmp_path):
        first, second = tmp_path / 'first', tmp_path / 'second'
        run('simulate', config=config_file, out=first)
        run('simulate', config=config_file, out=second)
        for name in ('decisions.csv', 'scenario.json'):
            assert (first / name).read_bytes() == (second / name).read_bytes()


class TestFailures:
    """Each failure kind maps to its own exit code."""

    def test_missing_input_file(self, config_file, tmp_path):
        with pytest.raises(CommandError, match='missing file') as excinfo:
            run('cluster', str(tmp_path / 'absent.csv'), config=config_file, out=tmp_path)
        assert excinfo.value.returncode == 3

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            run('generate', config=tmp_path / 'absent.json', out=tmp_path)
        assert excinfo.value.returncode == 3

    def test_file_without_header(self, config_file, tmp_path):
        path = tmp_path / 'plain.csv'
        path.write_text('id,x_meters\n1,2\n')
        with pytest.raises(CommandError, match='schema') as excinfo:
            run('cluster', str(path), config=config_file, out=tmp_path)
        assert excinfo.value.returncode == 4

    def test_invalid_config(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps({'training': {'epochs': -1}}))
        with pytest.raises(CommandError, match='config: training.epochs') as excinfo:
            run('generate', config=path, out=tmp_path)
        assert excinfo.value.returncode == 5

    def test_leave_one_out_refused(self, generated, config_file, tmp_path, settings):
        settings.EDGECAST_LOOCV_CAP = 10
        with pytest.raises(CommandError, match='leave-one-out refused') as excinfo:
            run('compare', str(generated / 'interactions.csv'), config=config_file, out=tmp_path)
        assert excinfo.value.returncode == 6
