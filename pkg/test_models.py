"""Tests for the surrogate architectures: sizes, nonlinearity counts, gradients and Geo wrapping."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geneo_lab.errors import ConfigError, SpaceMismatchError
from geneo_lab.harness_toolkit import ModelSpec, model_diagram
from geneo_lab.harness_toolkit.hx_config import FULL_MODELS, FULL_RESCALED
from geneo_lab.harness_toolkit.hx_verify import GRADIENT_KINDS, check_gradient_draw
from geneo_lab.perception_toolkit import image_space, score_space
from geneo_lab.surrogate_toolkit import (
    CnnModel, EmptyModel, Geo1Model, Geo2Model, MlpModel, bank_from_arrays, count_nonlinearities, count_params,
)


def bank(count, side=3):
    return bank_from_arrays(np.random.default_rng(count).uniform(size=(count, side, side)))


@pytest.mark.parametrize('hidden,expected', [
    ((40,), 31810), ((20,), 15910), ((), 7850), ((7,), 5575), ((5,), 3985), ((4,), 3190),
])
def test_mlp_sizes_on_full_images(hidden, expected):
    assert MlpModel((28, 28), hidden).count_params() == expected


@pytest.mark.parametrize('hidden,expected', [((40,), 8290), ((), 1970), ((7,), 1459), ((5,), 1045)])
def test_mlp_sizes_on_half_images(hidden, expected):
    assert MlpModel((14, 14), hidden).count_params() == expected


@pytest.mark.parametrize('patterns', [98, 150, 500])
def test_geo1_size(patterns):
    model = Geo1Model(bank(patterns), (28, 28))
    assert count_params(model) == 10 * patterns + 10
    assert count_nonlinearities(model) == patterns + 10


@pytest.mark.parametrize('patterns,expected', [(250, 2221), (150, 2121), (50, 2021)])
def test_geo2_size_on_half_images(patterns, expected):
    model = Geo2Model(bank(patterns), (14, 14))
    assert model.count_params() == expected == patterns + 1 + 10 * 14 * 14 + 10


def test_reference_cnn_size():
    assert CnnModel().count_params() == 228010


def test_cnn_needs_room_for_two_stages():
    with pytest.raises(ConfigError):
        CnnModel((8, 8))


def test_empty_model_has_nothing():
    model = EmptyModel((4, 4))
    model.init_params(0)
    assert model.count_params() == model.count_nonlinearities() == 0
    assert np.allclose(model.scores(np.zeros((2, 4, 4))), 0.5)


def test_reference_table_matches_formulas():
    for spec in FULL_MODELS:
        assert spec.expected_params((28, 28)) == spec.params, spec.id
    for spec in FULL_RESCALED:
        assert spec.expected_params((14, 14)) == spec.params, spec.id


def test_declared_size_mismatch():
    spec = ModelSpec('mlp-7', 'mlp', 0.1, 1, hidden=(7,), params=5000)
    with pytest.raises(ConfigError):
        spec.validate_params((28, 28))


@pytest.mark.parametrize('spec', [
    ModelSpec('geo1-500', 'geo1', 0.1, 1, patterns=500),
    ModelSpec('geo2-50', 'geo2', 0.1, 1, patterns=50),
    ModelSpec('mlp-40', 'mlp', 0.1, 1, hidden=(40,)),
    ModelSpec('cnn', 'cnn', 0.1, 1),
], ids=lambda s: s.id)
def test_diagram_complexity_matches_model(spec):
    shape = (28, 28)
    md = model_diagram(spec, shape)
    model = spec.build(shape, bank(max(spec.patterns, 1)))
    assert md.complexity('params') == model.count_params()
    assert md.complexity('nonlinearities') == model.count_nonlinearities()


def test_geo1_500_complexities():
    md = model_diagram(ModelSpec('geo1-500', 'geo1', 0.1, 1, patterns=500), (28, 28))
    assert md.complexity('params') == 5010
    assert md.complexity('nonlinearities') == 510
    with pytest.raises(ConfigError):
        md.complexity('latency')


def test_build_needs_enough_patterns():
    with pytest.raises(ConfigError):
        ModelSpec('geo1-5', 'geo1', 0.1, 1, patterns=5).build((28, 28), bank(3))


@pytest.mark.parametrize('kind', GRADIENT_KINDS)
def test_gradients_match_finite_differences(kind):
    failures, worst, _ = check_gradient_draw(kind, 1234)
    assert failures == []
    assert worst <= 1e-4


@settings(max_examples=5)
@given(st.sampled_from(GRADIENT_KINDS), st.integers(0, 2 ** 31 - 2))
def test_gradients_on_random_draws(kind, seed):
    failures, _, _ = check_gradient_draw(kind, seed)
    assert failures == []


def test_init_is_reproducible_and_bounded():
    a, b = MlpModel((6, 6), (4,)), MlpModel((6, 6), (4,))
    a.init_params(3)
    b.init_params(3)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert np.abs(a.params['W0']).max() <= 1 / 6


def test_set_params_checks_shapes():
    model = MlpModel((6, 6))
    with pytest.raises(ConfigError):
        model.set_params({'W0': np.zeros((36, 9)), 'b0': np.zeros(10)})


def test_model_as_geo():
    model = MlpModel((6, 6), (3,))
    model.init_params(0)
    geo = model.as_geo(image_space('img', 6, 6, translations=False), score_space('scores'))
    images = np.random.default_rng(0).uniform(size=(3, 6, 6))
    out = geo.map_batch(list(images))
    assert np.allclose(np.stack(out)[:, 0], model.scores(images))
    assert geo(images[0]).shape == (1, 10)
    with pytest.raises(SpaceMismatchError):
        model.as_geo(image_space('img', 5, 5, translations=False), score_space('scores'))


def test_wrong_image_size():
    with pytest.raises(SpaceMismatchError):
        MlpModel((6, 6)).scores(np.zeros((1, 5, 5)))


def test_softmax_head_sums_to_one():
    model = CnnModel((10, 10), (2, 3), 4)
    model.init_params(1)
    scores = model.scores(np.random.default_rng(1).uniform(size=(3, 10, 10)))
    assert np.allclose(scores.sum(axis=1), 1.0)
