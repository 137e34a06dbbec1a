"""Tests for pattern sampling, activation maps, pooling and rescaling."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geneo_lab.errors import GeneoLabError, SpaceMismatchError, StructuralError
from geneo_lab.geo_toolkit import Declared, Validated
from geneo_lab.harness_toolkit.hx_verify import check_invariance
from geneo_lab.perception_toolkit import image_space
from geneo_lab.surrogate_toolkit import (
    Geo1Model, activation_maps, bank_from_arrays, brute_force_downscale, channel_wise_max, crop_torus,
    cwm_features, downscale_2x2_max, downscale_geo, extract_features, features_for_patterns, image_wide_maxpool,
    pattern_activation_map, sample_patterns, shift_images, upscale_geo, upscale_nearest,
)


def sparse_images(count, side=12, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(size=(count, side, side)) * (rng.uniform(size=(count, side, side)) < 0.4)


def test_pattern_matches_its_own_crop():
    image = sparse_images(1, seed=3)[0]
    pattern = crop_torus(image, (0, 11), 5, 3)
    maps = activation_maps(image, pattern)
    assert maps[0, 11] == 1.0
    assert maps.min() >= 0.0 and maps.max() <= 1.0


def test_crop_wraps_around():
    image = np.arange(16.0).reshape(4, 4)
    assert np.array_equal(crop_torus(image, (0, 0), 3, 3),
                          [[15, 12, 13], [3, 0, 1], [7, 4, 5]])


def test_pattern_larger_than_image():
    with pytest.raises(SpaceMismatchError):
        activation_maps(np.zeros((3, 3)), np.zeros((5, 5)))


def test_batched_features_match_the_loop():
    images = sparse_images(7, seed=1)
    bank = sample_patterns(images, 4, 3, 5, seed=2)
    expected = features_for_patterns(images, bank.patterns)
    assert np.allclose(extract_features(images, bank), expected)
    assert np.array_equal(extract_features(images, bank, threads=3), extract_features(images, bank))


def test_channel_wise_max_keeps_only_the_peak():
    a = np.array([[0.2, 0.9], [0.9, 0.1]])
    assert np.array_equal(channel_wise_max(a), [[0.0, 0.9], [0.9, 0.0]])


def test_maxpool_of_own_crop_is_one():
    image = sparse_images(1, seed=6)[0]
    pattern = crop_torus(image, (4, 4), 3, 3)
    assert image_wide_maxpool(pattern_activation_map(image, pattern)) == 1.0
    with pytest.raises(StructuralError):
        image_wide_maxpool(np.zeros((0, 0)))


def test_cwm_features_hold_each_maximum():
    images = sparse_images(3, seed=4)
    bank = sample_patterns(images, 2, 3, 3, seed=5)
    maps = cwm_features(images, bank).toarray().reshape(3, 12 * 12, 2)
    dense = features_for_patterns(images, bank.patterns)
    assert np.allclose(maps.max(axis=1), dense)
    for n in range(3):
        for i in range(2):
            peak = activation_maps(images[n], bank.patterns[i]).ravel()
            assert np.allclose(maps[n, :, i], channel_wise_max(peak))


def test_sampled_centers_are_lit():
    images = sparse_images(5, seed=6)
    bank = sample_patterns(images, 20, 5, 3, seed=7)
    assert bank.patch_shape == (3, 5)
    for pattern, source, (r, c) in zip(bank.patterns, bank.sources, bank.centers):
        assert images[source][r, c] > 0
        assert pattern[1, 2] == images[source][r, c]


def test_sampling_is_reproducible():
    images = sparse_images(5, seed=8)
    a, b = sample_patterns(images, 6, seed=9, width=3, height=3), sample_patterns(images, 6, 3, 3, seed=9)
    assert np.array_equal(a.patterns, b.patterns)
    assert a.head(2).sources == a.sources[:2]


def test_sampling_rejects_bad_requests():
    images = sparse_images(2)
    with pytest.raises(GeneoLabError):
        sample_patterns(images, 3, 4, 3)
    with pytest.raises(GeneoLabError):
        sample_patterns(np.zeros((2, 12, 12)), 1, 3, 3)
    with pytest.raises(SpaceMismatchError):
        sample_patterns(images, 1, 13, 13)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 1000))
def test_downscale_matches_block_loop(h, w, seed):
    image = np.random.default_rng(seed).uniform(size=(2 * h, 2 * w))
    assert np.array_equal(downscale_2x2_max(image), brute_force_downscale(image))


def test_downscale_undoes_upscale():
    images = sparse_images(2, side=6)
    assert np.array_equal(downscale_2x2_max(upscale_nearest(images)), images)


def test_downscale_needs_even_dims():
    with pytest.raises(StructuralError):
        downscale_2x2_max(np.zeros((5, 4)))


def test_rescaling_geneos():
    strided, half = image_space('s2', 12, 12, stride=2), image_space('half', 6, 6)
    down = downscale_geo(strided, half)
    assert isinstance(down.certificate, Validated)
    up = upscale_geo(half, strided)
    assert isinstance(up.certificate, Declared)
    with pytest.raises(SpaceMismatchError):
        downscale_geo(strided, image_space('wrong', 5, 6))


def test_geo1_is_shift_invariant():
    images = sparse_images(6, seed=10)
    model = Geo1Model(sample_patterns(images, 8, 5, 5, seed=11), (12, 12))
    model.init_params(12)
    shifted = shift_images(images, (5, 3))
    assert np.allclose(model.scores(shifted), model.scores(images))
    failures, worst, ne = check_invariance(model, images[:2])
    assert failures == [] and ne == 0


def test_hand_built_bank():
    bank = bank_from_arrays(np.ones((2, 3, 3)))
    assert len(bank) == 2
    assert bank.centers == ((0, 0), (0, 0))
    with pytest.raises(StructuralError):
        bank_from_arrays(np.ones((3, 3)))
