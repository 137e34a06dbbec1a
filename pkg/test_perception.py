"""Tests for perception spaces, groups and their validators."""
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geneo_lab.errors import MetricAxiomError, StructuralError, UnsupportedSpaceError
from geneo_lab.perception_toolkit import (
    DiscreteMetric, ExplicitTableMetric, FiniteGroup, LInfinityMetric, finite_space, group_law_violations,
    image_space, induced_group_metric, load_spaces, orbit_space, product_space, unit_space, validate_space,
)

SWAP = [[0, 1, 2], [1, 0, 2]]


def two_point():
    return finite_space('two', [0, 1])


def test_trivial_group_on_two_points_is_valid_and_exhaustive():
    report = validate_space(two_point())
    assert report.ok
    assert report.exhaustive


def test_torus_on_small_images_is_valid():
    space = image_space('torus4', 4, 4)
    assert space.group.order == 16
    assert validate_space(space, probe_budget=2000).ok


def test_swap_breaks_isometry_of_explicit_table():
    table = [[0, 1, 2], [1, 0, 5], [2, 5, 0]]
    # 1 + 2 < 5 violates the triangle inequality, so the table cannot be strict
    metric = ExplicitTableMetric(table, strict=False)
    space = finite_space('three', [0, 1, 2], metric, FiniteGroup.cyclic(2), SWAP)
    report = validate_space(space)
    assert ('isometry', (1, 0, 2)) in report.witnesses
    assert 'triangle' in report.axioms()


def test_strict_table_rejects_triangle_violation():
    with pytest.raises(MetricAxiomError):
        ExplicitTableMetric([[0, 1, 2], [1, 0, 5], [2, 5, 0]])


def test_malformed_action_table_is_structural():
    space = finite_space('bad', [0, 1], group=FiniteGroup.cyclic(2), action_table=[[0, 1], [1, 2]])
    with pytest.raises(StructuralError):
        validate_space(space)


def test_non_square_group_table_is_structural():
    with pytest.raises(StructuralError):
        FiniteGroup('broken', np.zeros((2, 3)), 0, np.zeros(2))


def test_group_law_violation_is_reported():
    # 1∘1 = 1 leaves 1 without an inverse
    group = FiniteGroup('not-a-group', np.array([[0, 1], [1, 1]]), 0, np.array([0, 0]))
    violations, exhaustive = group_law_violations(group)
    assert exhaustive
    assert 'inverse' in {axiom for axiom, _ in violations}


def test_induced_group_metric_finite():
    space = finite_space('two', [0, 1], group=FiniteGroup.cyclic(2), action_table=[[0, 1], [1, 0]])
    assert induced_group_metric(space, 1, 1).value == 0.0
    d = induced_group_metric(space, 1, 0)
    assert d.value == 1.0
    assert not d.lower_bound


def test_induced_group_metric_on_probes_is_flagged():
    space = image_space('torus', 4, 4)
    d = induced_group_metric(space, 4, 0, probes=[np.full((4, 4), 0.5)])
    assert d.value == 0.0
    assert d.lower_bound


def test_induced_group_metric_needs_probes_on_images():
    with pytest.raises(ValueError):
        induced_group_metric(image_space('torus', 4, 4), 1, 0)


def test_product_with_unit_is_identity():
    s = finite_space('s', ['a', 'b', 'c'])
    assert product_space(unit_space(), s) is s
    assert product_space(s, unit_space()) is s


def test_product_of_discrete_spaces():
    p = product_space(two_point(), finite_space('other', [0, 1]))
    assert p.carrier.size == 4
    assert p.id == 'two⊗other'
    assert p.distance((0, 0), (1, 1)) == 1.0


def test_product_uses_max_metric():
    a = finite_space('a', [0, 1], ExplicitTableMetric([[0, 3], [3, 0]]))
    b = finite_space('b', [0, 1], ExplicitTableMetric([[0, 5], [5, 0]]))
    p = product_space(a, b)
    assert p.distance((0, 0), (1, 1)) == 5.0
    assert validate_space(p).ok


def test_product_needs_finite_carriers():
    with pytest.raises(UnsupportedSpaceError):
        product_space(image_space('img', 2, 2), two_point())


def test_product_group_order_and_size():
    a = finite_space('a', [0, 1], group=FiniteGroup.cyclic(2), action_table=[[0, 1], [1, 0]])
    b = finite_space('b', [0, 1, 2], group=FiniteGroup.cyclic(3), action_table=[[0, 1, 2], [1, 2, 0], [2, 0, 1]])
    p = product_space(a, b)
    assert p.group.order == 6
    assert p.carrier.size == 6
    assert validate_space(p).ok


def test_orbit_space_closes_seeds():
    group = FiniteGroup.cyclic(4)
    space = orbit_space('square', [(1, 0)], group, lambda g, p: _rotate(p, g))
    assert space.carrier.size == 4
    assert validate_space(space).ok


def _rotate(p, g):
    x, y = p
    for _ in range(g):
        x, y = -y, x
    return (x, y)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 15), st.integers(0, 15))
def test_torus_action_is_compatible(h, w, g1, g2):
    space = image_space('torus', h, w)
    g1, g2 = g1 % space.group.order, g2 % space.group.order
    image = np.random.default_rng(g1 * 16 + g2).random((h, w))
    lhs = space.act(space.group.mul(g1, g2), image)
    rhs = space.act(g1, space.act(g2, image))
    assert np.array_equal(lhs, rhs)


@given(st.integers(2, 6), st.integers(0, 1000))
def test_induced_group_metric_is_a_pseudo_metric(n, seed):
    rng = np.random.default_rng(seed)
    points = rng.integers(0, 5, size=(n, 2))
    group = FiniteGroup.cyclic(n)
    table = np.array([np.roll(np.arange(n), -g) for g in range(n)])
    l1 = np.abs(points[:, None, :] - points[None, :, :]).sum(axis=2).astype(float)
    dist = np.max([l1[np.ix_(row, row)] for row in table], axis=0)
    space = finite_space('ring', range(n), ExplicitTableMetric(dist, strict=False), group, table)
    if not validate_space(space).ok:
        return
    d = np.array([[induced_group_metric(space, a, b).value for b in range(n)] for a in range(n)])
    assert np.all(np.diag(d) == 0)
    assert np.allclose(d, d.T)
    for k in range(n):
        assert np.all(d <= d[:, [k]] + d[[k], :] + 1e-9)


def test_load_spaces(tmp_path):
    doc = {'spaces': [{
        'id': 'pair',
        'elements': ['x', 'y'],
        'metric': {'kind': 'table', 'table': [[0, 2], [2, 0]]},
        'group': {'kind': 'cyclic', 'order': 2},
        'action': {'table': [[0, 1], [1, 0]]},
    }]}
    path = tmp_path / 'spaces.json'
    path.write_text(json.dumps(doc))
    (space,) = load_spaces(str(path))
    assert space.id == 'pair'
    assert space.distance('x', 'y') == 2.0
    assert space.act(1, 'x') == 'y'
    assert validate_space(space).ok


def test_linf_metric():
    assert LInfinityMetric().between(None, np.zeros((2, 2)), np.eye(2) * 0.25) == 0.25
    assert DiscreteMetric().between(None, 'a', 'a') == 0.0
