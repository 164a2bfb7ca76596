"""
Tests for building the merged run configuration from files, flags and
defaults.
"""

import json
from pathlib import Path

import pytest

from offloading.artifacts import config_digest
from offloading.exceptions import ConfigError
from offloading.runconfig import load_run_config, run_config_from_dict


class TestRunConfigFromDict:
    """Precedence and validation of every section."""

    def test_defaults(self, settings):
        config = run_config_from_dict({})
        assert config.seed == 0
        assert config.jobs == 1
        assert config.output_dir == Path(settings.EDGECAST_OUTPUT_DIR)
        assert config.training.epochs == 20
        assert config.pipeline.k is None

    def test_flags_beat_the_file(self):
        config = run_config_from_dict({'seed': 3, 'jobs': 2}, {'seed': 9, 'jobs': None})
        assert config.seed == 9
        assert config.jobs == 2

    def test_generation_seed_follows_master_seed(self):
        config = run_config_from_dict({'seed': 4, 'generation': {'n_devices': 80}})
        assert config.generation.seed == 4
        assert config.generation.n_devices == 80
        assert config.generation.computational_fraction == 0.1

    def test_sections_become_dataclasses(self):
        config = run_config_from_dict({
            'network': {'trunk_layers': [16, 8]},
            'training': {'loss_weights': [1, 1, 2]},
            'pipeline': {'k': 4, 'predictor': 'Lasso'},
        })
        assert config.network.trunk_layers == (16, 8)
        assert config.training.loss_weights == (1.0, 1.0, 2.0)
        assert config.pipeline.k == 4
        assert config.pipeline.predictor == 'Lasso'

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match='config: unknown keys colour'):
            run_config_from_dict({'colour': 'blue'})

    def test_unknown_section_key(self):
        with pytest.raises(ConfigError, match='training: unknown keys epoch'):
            run_config_from_dict({'training': {'epoch': 3}})

    def test_invalid_field_names_its_path(self):
        with pytest.raises(ConfigError, match='training.epochs'):
            run_config_from_dict({'training': {'epochs': 0}})

    def test_dataclass_checks_surface_as_config_errors(self):
        with pytest.raises(ConfigError, match='network: dropout_rate'):
            run_config_from_dict({'network': {'dropout_rate': 1.0}})

    def test_bad_seed(self):
        with pytest.raises(ConfigError, match='seed'):
            run_config_from_dict({'seed': True})
        with pytest.raises(ConfigError, match='non-negative'):
            run_config_from_dict({'seed': -1})

    def test_baseline_hyperparameters(self):
        config = run_config_from_dict({'baselines': {'Lasso': {'alpha': 0.5}}})
        assert config.hyperparameters()['Lasso'] == {'alpha': 0.5}
        assert config.hyperparameters()['KNeighbors'] == {'n_neighbors': 5}

    def test_unknown_baseline(self):
        with pytest.raises(ConfigError, match='unknown baseline'):
            run_config_from_dict({'baselines': {'RandomForest': {}}})


class TestDigest:
    """Only settings that shape the outputs change the digest."""

    def test_jobs_and_output_dir_do_not_count(self):
        first = run_config_from_dict({'jobs': 1, 'output_dir': 'a'})
        second = run_config_from_dict({'jobs': 8, 'output_dir': 'b'})
        assert config_digest(first.to_dict()) == config_digest(second.to_dict())

    def test_seed_counts(self):
        first = run_config_from_dict({'seed': 1})
        second = run_config_from_dict({'seed': 2})
        assert config_digest(first.to_dict()) != config_digest(second.to_dict())
        assert len(config_digest(first.to_dict())) == 12


class TestLoadRunConfig:

    def test_reads_file(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text(json.dumps({'seed': 5, 'clustering': {'k_max': 6}}))
        config = load_run_config(path)
        assert config.seed == 5
        assert config.clustering.k_max == 6

    def test_no_file_means_defaults(self):
        assert load_run_config(None, {'seed': 2}).seed == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_run_config(tmp_path / 'absent.json')

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text('{seed: 1')
        with pytest.raises(ConfigError, match='not valid JSON'):
            load_run_config(path)
