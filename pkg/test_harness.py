"""Tests for experiment configs, the run/rescaled commands and the command line."""
import json
import os

import numpy as np
import pandas as pd
import pytest

from geneo_lab.config import LabConfig
from geneo_lab.errors import ConfigError
from geneo_lab.harness_toolkit import (
    RESULT_COLUMNS, ExperimentConfig, PatternSpec, classification_observer, cmd_rescaled, cmd_run,
    cmd_sample_patterns, load_experiment_data, main, rescale_observer,
)
from geneo_lab.surrogate_toolkit import load_bank, write_idx

TINY_CNN = {'lr': 0.05, 'epochs': 2, 'batch_size': 16, 'channels': [2, 3], 'dense': 4}


def write_digits(directory, per_class=20, side=12, seed=0):
    """Ten classes of noisy 12×12 images, class k lighting rows k and k + 1."""
    rng = np.random.default_rng(seed)
    labels = np.tile(np.arange(10), per_class)
    images = rng.integers(0, 40, size=(len(labels), side, side))
    for k in range(10):
        images[labels == k, k:k + 2, :] += 200
    cut = 14 * 10
    os.makedirs(directory, exist_ok=True)
    parts = {
        'train_images': images[:cut], 'train_labels': labels[:cut],
        'test_images': images[cut:], 'test_labels': labels[cut:],
    }
    for role, array in parts.items():
        write_idx(os.path.join(directory, LabConfig.MNIST_FILES[role]), array, compress=True)
    return directory


def config_doc(tmp_path, blackbox):
    return {
        'data': {'mnist_dir': write_digits(str(tmp_path / 'mnist'))},
        'image_shape': [12, 12],
        'subsample': None,
        'out': str(tmp_path / 'out'),
        'patterns': {'count': 6, 'width': 3, 'height': 3, 'seed': 1},
        'blackbox': blackbox,
        'models': [
            {'id': 'mlp-0', 'kind': 'mlp', 'lr': 0.5, 'epochs': 5, 'params': 1450},
            {'id': 'geo1-6', 'kind': 'geo1', 'lr': 0.5, 'epochs': 5, 'patterns': 6, 'params': 70},
            {'id': 'geo2-4', 'kind': 'geo2', 'lr': 0.2, 'epochs': 3, 'patterns': 4, 'params': 1455},
        ],
        'rescaled': [
            {'id': 'mlp-0', 'kind': 'mlp', 'lr': 0.5, 'epochs': 5, 'params': 370},
            {'id': 'geo1-6', 'kind': 'geo1', 'lr': 0.5, 'epochs': 5, 'patterns': 6, 'params': 70},
        ],
    }


def test_experiment_data_pools_and_splits(tmp_path):
    cfg = ExperimentConfig.from_dict(config_doc(tmp_path, {'kind': 'supervisor'}), str(tmp_path))
    data = load_experiment_data(cfg)
    assert len(data) == 200
    assert [len(data.indices(t)) for t in ('train', 'val', 'test')] == [120, 40, 40]
    assert data.images.max() <= 1.0


def test_supervisor_fidelity_is_accuracy(tmp_path):
    cfg = ExperimentConfig.from_dict(config_doc(tmp_path, {'kind': 'supervisor'}), str(tmp_path))
    assert cfg.blackbox.train is None
    report = cmd_run(cfg)
    assert report.failures == []
    assert [r.model for r in report.rows] == ['mlp-0', 'geo1-6', 'geo2-4']
    for row in report.rows:
        assert 0.0 <= row.accuracy <= 1.0
        assert row.fidelity == pytest.approx(row.accuracy)


def test_run_writes_tables_and_models(tmp_path):
    cfg = ExperimentConfig.from_dict(config_doc(tmp_path, {'kind': 'cnn', 'train': TINY_CNN}), str(tmp_path))
    report = cmd_run(cfg)
    assert report.failures == []
    results = pd.read_csv(os.path.join(cfg.out_dir, 'results.csv'))
    assert list(results.columns) == RESULT_COLUMNS
    assert results['model'].tolist() == ['cnn', 'mlp-0', 'geo1-6', 'geo2-4']
    assert results['params'].tolist() == [143, 1450, 70, 1455]
    assert results['nonlinearities'].tolist()[1:] == [10, 16, 19]
    assert results.loc[0, 'fidelity'] == 1.0
    assert results['fidelity'].between(0.0, 1.0).all()
    curve = pd.read_csv(os.path.join(cfg.out_dir, 'curve.csv'))
    assert list(curve.columns) == ['model', 'params', 'nonlinearities', 'accuracy']
    runtime = pd.read_csv(os.path.join(cfg.out_dir, 'runtime.csv'))
    assert set(runtime['status']) == {'ok'}
    for model_id in ('cnn', 'mlp-0', 'geo1-6', 'geo2-4'):
        assert os.path.exists(os.path.join(cfg.out_dir, 'models', f'{model_id}.json'))

    rescaled = cmd_rescaled(cfg)
    assert rescaled.failures == []
    assert rescaled.out_dir == os.path.join(cfg.out_dir, 'rescaled')
    assert [r.params for r in rescaled.rows] == [370, 70]
    with open(os.path.join(rescaled.out_dir, 'rescale.json'), encoding='utf-8') as fh:
        distances = json.load(fh)
    # upscaling then downscaling gives the half-size image back
    assert distances['half_to_full'] == 0.0
    assert 0.0 <= distances['full_to_half'] <= 1.0
    assert distances['symmetric'] == pytest.approx(max(distances['full_to_half'], distances['half_to_full']))
    assert distances['images'] == 40
    assert os.path.exists(os.path.join(rescaled.out_dir, 'results.csv'))


def test_sample_patterns_command(tmp_path):
    cfg = ExperimentConfig.from_dict(config_doc(tmp_path, {'kind': 'none'}), str(tmp_path))
    manifest = cmd_sample_patterns(cfg, str(tmp_path / 'bank.json'))
    bank = load_bank(manifest)
    assert len(bank) == 6
    assert bank.patch_shape == (3, 3)


def test_pattern_count_grows_to_the_largest_model(tmp_path):
    doc = config_doc(tmp_path, {'kind': 'none'})
    doc['patterns']['count'] = 2
    assert ExperimentConfig.from_dict(doc, str(tmp_path)).patterns.count == 6


def test_rescaled_patterns_are_half_size():
    spec = PatternSpec(width=9, height=7).rescaled()
    assert (spec.width, spec.height) == (5, 3)


def test_config_errors(tmp_path):
    doc = config_doc(tmp_path, {'kind': 'supervisor'})
    with pytest.raises(ConfigError, match='preset'):
        ExperimentConfig.from_dict(dict(doc, preset='huge'), str(tmp_path))
    wrong = dict(doc, models=[{'id': 'mlp-0', 'kind': 'mlp', 'lr': 0.5, 'epochs': 5, 'params': 7850}])
    with pytest.raises(ConfigError, match='7850'):
        ExperimentConfig.from_dict(wrong, str(tmp_path))
    with pytest.raises(ConfigError, match='Duplicate'):
        ExperimentConfig.from_dict(dict(doc, models=doc['models'] + doc['models'][:1]), str(tmp_path))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(doc, blackbox={'kind': 'oracle'}), str(tmp_path))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(dict(doc, data={'mnist_dir': str(tmp_path / 'nowhere')}), str(tmp_path))


def test_missing_dataset_setting(tmp_path, monkeypatch):
    monkeypatch.setattr(LabConfig, 'DATA_DIR', None)
    with pytest.raises(ConfigError, match='No dataset'):
        ExperimentConfig.from_dict({'blackbox': {'kind': 'none'}}, str(tmp_path))


def test_reference_cnn_does_not_fit_small_images(tmp_path):
    doc = config_doc(tmp_path, {'kind': 'cnn'})
    with pytest.raises(ConfigError, match='228010'):
        ExperimentConfig.from_dict(doc, str(tmp_path))


def test_observer_categories_build():
    spaces = classification_observer((12, 12))
    assert spaces.forward_arrow('geo1').id == 'embed'
    assert spaces.forward_arrow('mlp').id == 'id[images12x12]'
    assert spaces.backward_arrow().id == 'id[scores]'
    rescale = rescale_observer((12, 12))
    assert rescale.forward_arrow('geo1').id == 'reduce'
    assert rescale.forward_arrow('mlp').id == 'down_plain'
    with pytest.raises(ConfigError):
        rescale_observer((11, 12))


# -- command line ------------------------------------------------------------------------

def test_cli_run(tmp_path, capsys):
    doc = config_doc(tmp_path, {'kind': 'supervisor'})
    doc['models'] = doc['models'][:1]
    path = tmp_path / 'experiment.json'
    path.write_text(json.dumps(doc))
    assert main(['run', '--config', str(path), '--out', str(tmp_path / 'cli-out')]) == 0
    assert os.path.exists(tmp_path / 'cli-out' / 'results.csv')
    assert 'mlp-0' in capsys.readouterr().out


def test_cli_model_complexity(capsys):
    assert main(['complexity', '--model', 'geo1', '--patterns', '500']) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc['complexity'] == {'params': 5010, 'nonlinearities': 510}


def test_cli_check_diagram(tmp_path, capsys):
    good = tmp_path / 'good.dg'
    good.write_text("sort A; gen f: A -> A @ 2; diagram d = f ; f;")
    assert main(['check-diagram', str(good)]) == 0
    assert 'complexity[default] = 4' in capsys.readouterr().out
    bad = tmp_path / 'bad.dg'
    bad.write_text("sort A; sort B; gen f: A -> B; gen g: A -> B; diagram d = f ; g;")
    assert main(['check-diagram', str(bad)]) == 2


def test_cli_diagram_complexity_with_observer_file(tmp_path, capsys):
    source = tmp_path / 'pipeline.dg'
    source.write_text("sort A; gen f: A -> A @ 2; diagram d = f ; f;")
    observer = tmp_path / 'observer.json'
    observer.write_text(json.dumps({'name': 'cheap', 'complexity': {'f': 0.5}}))
    assert main(['complexity', str(source), 'd', '--observer', str(observer)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc['observer'] == 'cheap'
    assert doc['complexity'] == 1.0


def test_cli_verify(capsys):
    assert main(['verify', 'category-validation', '--instances', '3', '--seed', '5']) == 0
    assert 'category-validation: pass' in capsys.readouterr().out
    assert main(['verify', 'no-such-suite']) == 2


def test_cli_distance(tmp_path, capsys):
    spaces = tmp_path / 'spaces.json'
    spaces.write_text(json.dumps({'spaces': [{'id': 'x', 'elements': [0, 1, 2, 3]},
                                             {'id': 'labels', 'elements': [0, 1, 2]}]}))
    geos = tmp_path / 'geos.json'
    geos.write_text(json.dumps({'geos': [
        {'name': 'alpha', 'dom': 'x', 'cod': 'labels', 'table': [0, 1, 2, 0]},
        {'name': 'beta', 'dom': 'x', 'cod': 'labels', 'table': [0, 1, 1, 1]},
    ]}))
    observer = tmp_path / 'observer.json'
    observer.write_text(json.dumps({'translations': {'objects': ['x', 'labels'], 'arrows': []}}))
    args = ['distance', '--spaces', str(spaces), '--geos', str(geos), '--observer', str(observer)]
    assert main(args + ['--format', 'json', 'alpha', 'beta']) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc['distance'] == 0.5
    assert doc['pair'] == 'id[x]|id[labels]'
    assert main(args + ['alpha', 'beta']) == 0
    assert '# h(alpha, beta) = 0.500000' in capsys.readouterr().out
    assert main(args + ['alpha', 'gamma']) == 2


def test_cli_reports_injected_arrow(capsys):
    assert main(['verify', 'hemi-metric', '--instances', '2', '--inject-expansive']) == 1
    out = capsys.readouterr().out
    assert 'hemi-metric: FAIL' in out
    assert 'CategoryValidationError' in out
