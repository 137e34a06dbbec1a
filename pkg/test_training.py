"""Tests for datasets, splits, SGD training, black-box tables and model persistence."""
import numpy as np
import pytest

from geneo_lab.base_client import BaseDataClient
from geneo_lab.config import LabConfig
from geneo_lab.errors import ConfigError, DataFormatError, GeneoLabError, SplitError
from geneo_lab.perception_toolkit import image_space, score_space
from geneo_lab.surrogate_toolkit import (
    Geo2Model, ImageDataset, MlpModel, MnistClient, TrainConfig, accuracy, evaluate, load_bank, load_mnist,
    load_model, loss_and_grad, read_idx, read_prediction_table, sample_patterns, save_bank, save_model,
    split_counts, stratified_split, subsample, supervisor, train, write_idx, write_prediction_table,
)
from geneo_lab.surrogate_toolkit.sg_data import IMAGES_MAGIC, LABELS_MAGIC


def halves(per_class=40, seed=0):
    """Class 0 lights the left half of a 6×6 image, class 1 the right half."""
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], per_class)
    images = rng.uniform(0.0, 0.2, size=(len(labels), 6, 6))
    images[labels == 0, :, :3] += 0.7
    images[labels == 1, :, 3:] += 0.7
    return ImageDataset(images, labels)


def test_split_is_stratified_and_reproducible():
    ds = stratified_split(halves(), seed=3)
    counts = split_counts(ds)
    assert counts == {'train': {0: 24, 1: 24}, 'val': {0: 8, 1: 8}, 'test': {0: 8, 1: 8}}
    again = stratified_split(halves(), seed=3)
    assert np.array_equal(ds.split, again.split)


def test_split_needs_ten_per_class():
    with pytest.raises(SplitError):
        stratified_split(halves(per_class=9), seed=0)


def test_dataset_without_tags():
    with pytest.raises(SplitError):
        halves().indices('train')


def test_subsample_keeps_class_balance():
    ds = subsample(stratified_split(halves(), seed=1), {'train': 10}, seed=1)
    counts = split_counts(ds)
    assert counts['train'] == {0: 5, 1: 5}
    assert counts['test'] == {0: 8, 1: 8}


def test_idx_round_trip(tmp_path):
    images = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    labels = np.array([7, 1], dtype=np.uint8)
    write_idx(str(tmp_path / 'images.idx'), images, compress=True)
    write_idx(str(tmp_path / 'labels.idx'), labels)
    assert np.array_equal(read_idx(str(tmp_path / 'images.idx'), IMAGES_MAGIC), images)
    ds = load_mnist(str(tmp_path / 'images.idx'), str(tmp_path / 'labels.idx'))
    assert ds.images.max() == pytest.approx(23 / 255)
    assert ds.labels.tolist() == [7, 1]
    with pytest.raises(DataFormatError):
        read_idx(str(tmp_path / 'labels.idx'), IMAGES_MAGIC)


def test_truncated_idx(tmp_path):
    path = tmp_path / 'short.idx'
    path.write_bytes(b'\x00\x00\x08\x01\x00\x00\x00\x05\x01\x02')
    with pytest.raises(DataFormatError, match='truncated'):
        read_idx(str(path), LABELS_MAGIC)


def test_train_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        TrainConfig(lr=0.0, max_epochs=1)
    with pytest.raises(ConfigError):
        TrainConfig(lr=0.1, max_epochs=1, loss='hinge')


def test_loss_gradients_are_probability_gaps():
    logits = np.array([[0.0, 0.0], [2.0, -1.0]])
    value, grad = loss_and_grad('ce', logits, np.array([0, 1]))
    assert value == pytest.approx((np.log(2) + np.log(1 + np.exp(3))) / 2)
    assert np.allclose(grad.sum(axis=1), 0.0)


def test_logistic_regression_learns_halves():
    ds = stratified_split(halves(), seed=0)
    model = MlpModel((6, 6))
    result = train(model, ds, ds.labels, TrainConfig(lr=0.5, max_epochs=40, batch_size=16, seed=2, patience=40))
    assert result.best_val_accuracy >= 0.9
    assert evaluate(model, ds, 'test') >= 0.9
    val = ds.indices('val')
    assert accuracy(model, model.prepare(ds.images[val]), ds.labels[val]) == result.best_val_accuracy
    assert result.history[result.best_epoch - 1].val_accuracy == result.best_val_accuracy


def test_training_is_deterministic():
    ds = stratified_split(halves(), seed=0)
    cfg = TrainConfig(lr=0.5, max_epochs=5, batch_size=16, seed=4)
    a, b = MlpModel((6, 6), (3,)), MlpModel((6, 6), (3,))
    train(a, ds, ds.labels, cfg)
    train(b, ds, ds.labels, cfg)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_supervisor_targets_equal_labels():
    ds = stratified_split(halves(), seed=0)
    cfg = TrainConfig(lr=0.5, max_epochs=3, batch_size=16, seed=5)
    oracle = supervisor(ds).as_geo(image_space('img', 6, 6, translations=False), score_space('scores'))
    from_labels, from_oracle = MlpModel((6, 6)), MlpModel((6, 6))
    train(from_labels, ds, ds.labels, cfg)
    train(from_oracle, ds, oracle, cfg)
    assert all(np.array_equal(from_labels.params[k], from_oracle.params[k]) for k in from_labels.params)


def test_published_geo_ignores_later_training():
    ds = stratified_split(halves(), seed=0)
    model = MlpModel((6, 6))
    model.init_params(7)
    geo = model.as_geo(image_space('img', 6, 6, translations=False), score_space('scores'))
    image = ds.images[0]
    before = geo(image).copy()
    train(model, ds, ds.labels, TrainConfig(lr=0.5, max_epochs=5, batch_size=16, seed=1, warm_start=True))
    assert not np.allclose(model.scores(image[None])[0], before[0])
    assert np.array_equal(geo(image), before)
    assert np.array_equal(geo.map_batch([image])[0], before)


def test_training_rejects_wrong_image_size():
    ds = stratified_split(halves(), seed=0)
    with pytest.raises(GeneoLabError):
        train(MlpModel((5, 5)), ds, ds.labels, TrainConfig(lr=0.1, max_epochs=1))


def test_prediction_table_round_trip(tmp_path):
    ds = halves(per_class=10)
    path = str(tmp_path / 'predictions.csv')
    write_prediction_table(path, supervisor(ds).as_geo(image_space('img', 6, 6, translations=False),
                                                       score_space('scores')), ds)
    table = read_prediction_table(path, ds)
    assert [int(table(x).argmax()) for x in ds.images] == ds.labels.tolist()


def test_prediction_table_checks_consistency(tmp_path):
    ds = halves(per_class=10)
    path = tmp_path / 'bad.csv'
    path.write_text('index,predicted_class\n0,12\n')
    with pytest.raises(DataFormatError):
        read_prediction_table(str(path), ds)
    path.write_text('row,predicted_class\n0,1\n')
    with pytest.raises(DataFormatError):
        read_prediction_table(str(path), ds)


def test_model_round_trip(tmp_path):
    ds = halves(per_class=10)
    model = Geo2Model(sample_patterns(ds.images, 3, 3, 3, seed=1), (6, 6))
    model.init_params(7)
    manifest = save_model(model, str(tmp_path), 'geo2-3')
    loaded = load_model(manifest)
    assert loaded.kind == 'geo2'
    assert loaded.count_params() == model.count_params()
    assert np.allclose(loaded.bank.patterns, model.bank.patterns, atol=1e-7)
    assert np.allclose(loaded.scores(ds.images), model.scores(ds.images), atol=1e-5)


def test_mlp_round_trip_keeps_hidden_sizes(tmp_path):
    model = MlpModel((6, 6), (4,))
    model.init_params(0)
    loaded = load_model(save_model(model, str(tmp_path), 'mlp-4'))
    assert loaded.hidden == (4,)
    assert all(np.allclose(loaded.params[k], model.params[k], atol=1e-7) for k in model.params)


def test_bank_round_trip(tmp_path):
    ds = halves(per_class=10)
    bank = sample_patterns(ds.images, 4, 3, 3, seed=2)
    loaded = load_bank(save_bank(bank, str(tmp_path)))
    assert loaded.sources == bank.sources
    assert loaded.centers == bank.centers
    assert np.allclose(loaded.patterns, bank.patterns, atol=1e-7)


def test_missing_manifest(tmp_path):
    with pytest.raises(DataFormatError):
        load_model(str(tmp_path / 'nothing.json'))


class FakeResponse:
    def __init__(self, content):
        self.content = content

    def raise_for_status(self):
        pass


class FakeSession:
    def __init__(self, content):
        self.content = content
        self.urls = []

    def get(self, url, timeout=None):
        self.urls.append(url)
        return FakeResponse(self.content)

    def close(self):
        pass


def test_mirror_download_keeps_existing_files(tmp_path):
    client = MnistClient('https://mirror.example/mnist/')
    client.session = FakeSession(b'\x1f\x8b' + b'\x00' * 8)
    names = list(LabConfig.MNIST_FILES.values())
    for name in names[1:]:
        (tmp_path / name).write_bytes(b'kept')
    paths = client.download_all(str(tmp_path))
    assert client.session.urls == [f'https://mirror.example/mnist/{names[0]}']
    assert (tmp_path / names[0]).read_bytes().startswith(b'\x1f\x8b')
    assert (tmp_path / names[1]).read_bytes() == b'kept'
    assert set(paths) == set(LabConfig.MNIST_FILES)


def test_mirror_rejects_non_idx_payload(tmp_path):
    client = MnistClient('https://mirror.example/mnist')
    client.session = FakeSession(b'<html>not found</html>')
    with pytest.raises(DataFormatError):
        client.save('t10k-labels-idx1-ubyte.gz', str(tmp_path / 'labels.gz'))
    assert not (tmp_path / 'labels.gz').exists()


class RateLimited(Exception):
    pass


def test_mirror_rate_follows_calls_per_minute(monkeypatch):
    waits = []

    def no_sleep(seconds):
        waits.append(seconds)
        raise RateLimited()

    monkeypatch.setattr('time.sleep', no_sleep)
    client = BaseDataClient('https://mirror.example', calls_per_minute=2)
    client.session = FakeSession(b'payload')
    client.fetch('a')
    client.fetch('b')
    assert waits == []
    with pytest.raises(RateLimited):
        client.fetch('c')
    assert len(waits) == 1 and 0 < waits[0] <= 60
    assert client.session.urls == ['https://mirror.example/a', 'https://mirror.example/b']
    with pytest.raises(ConfigError):
        BaseDataClient('https://mirror.example', calls_per_minute=0)
