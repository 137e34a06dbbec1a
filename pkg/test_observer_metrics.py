"""Tests for translation categories, surrogate distances and the quantities built on them."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geneo_lab.diagram_toolkit import ComplexityAssignment, Gen, Interpretation, parse
from geneo_lab.errors import CategoryValidationError, ConfigError, SpaceMismatchError
from geneo_lab.geo_toolkit import Declared, GroupHom, check_nonexpansive, lookup_geo
from geneo_lab.harness_toolkit.hx_verify import (
    INJECTED_ARROW, build_lower_bound_instance, build_point_instance, check_hemi_metric, check_lower_bound,
    check_monotonicity, run_suite,
)
from geneo_lab.observer_toolkit import (
    Arrow, EvaluationSet, Observer, TranslationCategory, cost, enumerate_crossed_pairs, equivariance_lower_bound,
    explained_at_level, fidelity, load_observer, observer_from_dict, space_distance, surrogate_distance,
    symmetric_distance,
)
from geneo_lab.perception_toolkit import (
    ExplicitTableMetric, FiniteGroup, class_label_space, finite_space, image_space,
)
from geneo_lab.surrogate_toolkit import downscale_2x2_max

seeds = st.integers(0, 2 ** 31 - 2)


def identities_only(*spaces):
    return Observer(TranslationCategory(spaces, []), ComplexityAssignment({}), 'identities')


def test_identity_pair_counts_disagreements():
    x = finite_space('x', range(4))
    labels = class_label_space('labels', 3)
    alpha = lookup_geo(x, labels, [0, 1, 2, 0], name='alpha')
    beta = lookup_geo(x, labels, [0, 1, 1, 1], name='beta')
    obs = identities_only(x, labels)
    result = surrogate_distance(obs, alpha, beta, EvaluationSet.whole(x))
    assert result.value == 0.5
    assert result.pair.label == 'id[x]|id[labels]'
    assert surrogate_distance(obs, alpha, alpha, EvaluationSet.whole(x)).value == 0.0


def test_symmetric_distance_takes_the_larger_direction():
    x = finite_space('x', range(4))
    labels = class_label_space('labels', 3)
    alpha = lookup_geo(x, labels, [0, 1, 2, 0], name='alpha')
    beta = lookup_geo(x, labels, [0, 1, 1, 1], name='beta')
    obs = identities_only(x, labels)
    whole = EvaluationSet.whole(x)
    value = symmetric_distance(obs, alpha, beta, whole, whole)
    assert value == max(surrogate_distance(obs, alpha, beta, whole).value,
                        surrogate_distance(obs, beta, alpha, whole).value) == 0.5


def test_no_crossed_pair_means_infinite_distance():
    x, z = finite_space('x', range(2)), finite_space('z', range(2))
    labels = class_label_space('labels', 2)
    alpha = lookup_geo(x, labels, [0, 1], name='alpha')
    beta = lookup_geo(z, labels, [0, 1], name='beta')
    result = surrogate_distance(identities_only(x, z, labels), alpha, beta, EvaluationSet.whole(x))
    assert math.isinf(result.value)
    assert result.pair is None


def test_translation_closes_the_gap():
    x = finite_space('x', range(2), group=FiniteGroup.cyclic(2), action_table=[[0, 1], [1, 0]])
    labels = class_label_space('labels', 2)
    flip = lookup_geo(x, x, [1, 0], name='flip')
    alpha = lookup_geo(x, labels, [0, 1], name='alpha')
    beta = lookup_geo(x, labels, [1, 0], name='beta')
    without = identities_only(x, labels)
    category = TranslationCategory([x, labels], [Arrow('flip', check_nonexpansive(flip))])
    with_flip = Observer(category, without.complexity)
    assert surrogate_distance(without, alpha, beta, EvaluationSet.whole(x)).value == 1.0
    result = surrogate_distance(with_flip, alpha, beta, EvaluationSet.whole(x))
    assert result.value == 0.0
    assert result.pair.forward.id == 'flip'
    assert len(result.costs) == len(enumerate_crossed_pairs(with_flip, alpha, beta)) == 2


def test_cost_needs_connecting_pair():
    x = finite_space('x', range(2))
    labels = class_label_space('labels', 2)
    alpha = lookup_geo(x, labels, [0, 1], name='alpha')
    obs = identities_only(x, labels)
    (pair,) = enumerate_crossed_pairs(obs, alpha, alpha)
    other = lookup_geo(labels, x, [0, 1], name='back')
    with pytest.raises(SpaceMismatchError):
        cost(pair, other, other, EvaluationSet.whole(labels))


def test_fidelity_is_agreement_rate():
    x = finite_space('x', range(4))
    labels = class_label_space('labels', 3)
    alpha = lookup_geo(x, labels, [0, 1, 2, 0], name='alpha')
    beta = lookup_geo(x, labels, [0, 1, 1, 1], name='beta')
    assert fidelity(alpha, beta, x.elements) == 0.5
    assert fidelity(alpha, alpha, x.elements) == 1.0


def test_space_distance_to_itself_is_zero():
    x = finite_space('x', range(3), ExplicitTableMetric([[0, 1, 2], [1, 0, 1], [2, 1, 0]]))
    obs = identities_only(x)
    assert space_distance(obs, x, x, EvaluationSet.whole(x), EvaluationSet.whole(x)) == 0.0


def test_lower_bound_counts_broken_pairs():
    x = finite_space('x', range(2), group=FiniteGroup.cyclic(2), action_table=[[0, 1], [1, 0]])
    labels = class_label_space('labels', 2)
    beta = lookup_geo(x, labels, [0, 1], GroupHom.annihilator(x.group, labels.group), 'beta')
    bound = equivariance_lower_bound(beta, x, x.elements)
    assert bound.ne_count == 2
    assert bound.bound == 0.5
    assert bound.per_point == 0.25


def explained_observer():
    program = parse("sort A; sort B; gen big: A -> B @ 5; gen small: A -> B @ 2;")
    a, b = finite_space('A', range(3)), class_label_space('B', 2)
    interp = Interpretation({'A': a, 'B': b}, {
        'big': lookup_geo(a, b, [0, 1, 1], name='big'),
        'small': lookup_geo(a, b, [0, 1, 0], name='small'),
    })
    c = ComplexityAssignment.from_signature(program.signature, name='params')
    return Observer(TranslationCategory([a, b], []), c, 'params', interp), a


def test_simpler_close_model_explains():
    obs, a = explained_observer()
    verdict = explained_at_level(Gen('big'), Gen('small'), obs, EvaluationSet.whole(a), 1 / 3)
    assert verdict.explained
    assert verdict.distance == pytest.approx(1 / 3)
    assert (verdict.complexity_alpha, verdict.complexity_beta) == (5, 2)


def test_explanation_needs_tolerance_and_lower_complexity():
    obs, a = explained_observer()
    assert not explained_at_level(Gen('big'), Gen('small'), obs, EvaluationSet.whole(a), 0.1).explained
    assert not explained_at_level(Gen('small'), Gen('big'), obs, EvaluationSet.whole(a), 1.0).explained


def test_load_observer(tmp_path):
    two = finite_space('two', [0, 1])
    doc = {
        'name': 'flips',
        'translations': {'objects': ['two'], 'arrows': [{'id': 'flip', 'dom': 'two', 'cod': 'two', 'table': [1, 0]}]},
        'complexity': {'f': 2, 'g': 'inf'},
    }
    path = tmp_path / 'observer.json'
    path.write_text(json.dumps(doc))
    obs = load_observer(str(path), {'two': two})
    assert obs.name == 'flips'
    assert [a.id for a in obs.translations.arrows] == ['flip', 'id[two]']
    assert obs.complexity['f'] == 2.0
    assert math.isinf(obs.complexity['g'])
    flip, unit = obs.translations.arrow_index('flip'), obs.translations.arrow_index('id[two]')
    assert obs.translations.closure[(flip, flip)] == unit


def rescale_doc(certificate=None):
    arrow = {'id': 'shrink', 'dom': 'full', 'cod': 'half', 'kind': 'rescale2x2max'}
    if certificate:
        arrow['certificate'] = certificate
    return {'translations': {'objects': ['full', 'half'], 'arrows': [arrow]}, 'complexity': {}}


def test_rescale_arrow_downscales_by_block_max():
    spaces = {'full': image_space('full', 28, 28, stride=2), 'half': image_space('half', 14, 14)}
    obs = observer_from_dict(rescale_doc(), spaces)
    arrow = obs.translations.arrows[obs.translations.arrow_index('shrink')]
    assert arrow.kind == 'rescale2x2max'
    assert (arrow.dom.id, arrow.cod.id) == ('full', 'half')
    image = np.random.default_rng(7).random((28, 28))
    assert np.array_equal(arrow.geneo.geo(image), downscale_2x2_max(image))


def test_rescale_arrow_keeps_declared_reason():
    spaces = {'full': image_space('full', 8, 8, translations=False),
              'half': image_space('half', 4, 4, translations=False)}
    obs = observer_from_dict(rescale_doc({'kind': 'declared', 'reason': 'block max'}), spaces)
    certificate = obs.translations.arrows[obs.translations.arrow_index('shrink')].geneo.certificate
    assert isinstance(certificate, Declared)
    assert certificate.reason == 'block max'


def test_rescale_arrow_needs_stride_two_translations():
    spaces = {'full': image_space('full', 28, 28), 'half': image_space('half', 14, 14)}
    with pytest.raises(ConfigError, match='shrink'):
        observer_from_dict(rescale_doc(), spaces)


def test_expansive_arrow_in_file_is_rejected(tmp_path):
    near = finite_space('near', [0, 1], ExplicitTableMetric([[0, 1], [1, 0]]))
    far = finite_space('far', [0, 1], ExplicitTableMetric([[0, 3], [3, 0]]))
    doc = {'translations': {'arrows': [{'id': 'stretch', 'dom': 'near', 'cod': 'far', 'table': [0, 1]}]}}
    path = tmp_path / 'observer.json'
    path.write_text(json.dumps(doc))
    with pytest.raises(CategoryValidationError, match='stretch'):
        load_observer(str(path), {'near': near, 'far': far})


def test_category_needs_closure():
    x = finite_space('x', range(3))
    shift = lookup_geo(x, x, [1, 2, 0], name='shift')
    with pytest.raises(CategoryValidationError, match='Not closed'):
        TranslationCategory([x], [Arrow('shift', check_nonexpansive(shift))])


def test_sub_category_keeps_identities():
    inst = build_point_instance(11)
    sub = inst.observer.translations.sub_category([])
    assert {a.id for a in sub.arrows} == {'id[X]', 'id[Y]'}


@given(seeds)
def test_distance_is_a_hemi_metric(seed):
    failures, _ = check_hemi_metric(build_point_instance(seed))
    assert failures == []


@given(seeds)
def test_fewer_translations_never_shrink_distances(seed):
    failures, margin = check_monotonicity(build_point_instance(seed), np.random.default_rng(seed + 1))
    assert failures == []
    assert margin >= -1e-12


@given(seeds)
def test_non_equivariance_bounds_the_distance(seed):
    failures, _ = check_lower_bound(build_lower_bound_instance(seed))
    assert failures == []


@settings(max_examples=10)
@given(seeds)
def test_injected_expansive_arrow_is_named(seed):
    with pytest.raises(CategoryValidationError, match=INJECTED_ARROW):
        build_point_instance(seed, inject_expansive=True)


def test_category_validation_suite_passes():
    result = run_suite('category-validation', 3, seed=5)
    assert result.ok
    assert result.instances == 3
