"""Tests for GEOs, GENEOs and the structural combinators."""
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geneo_lab.errors import HomomorphismError, SpaceMismatchError, UnsupportedSpaceError
from geneo_lab.geo_toolkit import (
    EXHAUSTIVE, Declared, Geneo, Geo, GroupHom, NonExpansiveReport, Validated, check_equivariance,
    check_nonexpansive, compose, copy, declare_geneo, discard, extensionally_equal, identity, load_geos,
    lookup_geo, sample_group_probe, swap, tensor,
)
from geneo_lab.harness_toolkit.hx_verify import build_point_instance, cyclic_permutation, power
from geneo_lab.perception_toolkit import (
    ExplicitTableMetric, FiniteGroup, finite_space, image_space, orbit_space, product_space,
)
from geneo_lab.surrogate_toolkit import downscale_geo, pattern_activation_map


def swap_space(space_id='two'):
    return finite_space(space_id, [0, 1], group=FiniteGroup.cyclic(2), action_table=[[0, 1], [1, 0]])


def three(space_id):
    return finite_space(space_id, ['a', 'b', 'c'])


def test_identity_is_equivariant_and_validated():
    s = swap_space()
    ident = identity(s)
    assert check_equivariance(ident).ok
    assert isinstance(ident.certificate, Validated)


def test_constant_map_breaks_equivariance_everywhere():
    s = swap_space()
    const = lookup_geo(s, s, [0, 0], GroupHom.identity(s.group), 'const')
    report = check_equivariance(const)
    assert report.exhaustive
    assert sorted(report.violations) == [(1, 0), (1, 1)]


def test_projection_of_point_sets_is_equivariant():
    window = range(-1, 2)
    z3 = FiniteGroup.torus(3, 3)
    shifts = [(i, j) for i in range(3) for j in range(3)]

    def move3(g, pts):
        di, dj = shifts[g]
        return frozenset(((x + di + 1) % 3 - 1, (y + dj + 1) % 3 - 1, z) for x, y, z in pts)

    def move2(g, pts):
        di, dj = shifts[g]
        return frozenset(((x + di + 1) % 3 - 1, (y + dj + 1) % 3 - 1) for x, y in pts)

    seeds3 = [frozenset({(0, 0, 0), (1, 0, 1)}), frozenset({(-1, 1, 1)})]
    space3 = orbit_space('sets3', seeds3, z3, move3)
    shadows = [frozenset((x, y) for x, y, _ in pts) for pts in space3.elements]
    space2 = orbit_space('sets2', shadows, z3, move2)
    table = [space2.carrier.index_of(frozenset((x, y) for x, y, _ in pts)) for pts in space3.elements]
    shadow = lookup_geo(space3, space2, table, GroupHom.identity(z3), 'shadow')
    assert check_equivariance(shadow).ok
    assert all(x in window for pts in space2.elements for p in pts for x in p)


def test_scaling_is_expansive_with_ratio_two():
    dom = finite_space('d', [0, 1], ExplicitTableMetric([[0, 1], [1, 0]]))
    cod = finite_space('c', [0, 1], ExplicitTableMetric([[0, 2], [2, 0]]))
    result = check_nonexpansive(lookup_geo(dom, cod, [0, 1], name='double'))
    assert isinstance(result, NonExpansiveReport)
    assert result.worst_ratio == 2.0


def test_downscale_is_nonexpansive_on_samples():
    strided = image_space('s2', 8, 8, stride=2)
    half = image_space('half', 4, 4)
    geneo = downscale_geo(strided, half)
    rng = np.random.default_rng(1)
    pairs = [(rng.random((8, 8)), rng.random((8, 8))) for _ in range(20)]
    assert isinstance(check_nonexpansive(geneo, pairs), Geneo)


def test_exhaustive_checks_need_finite_domains():
    img = image_space('img', 3, 3)
    with pytest.raises(UnsupportedSpaceError):
        check_equivariance(identity(img), EXHAUSTIVE)
    with pytest.raises(UnsupportedSpaceError):
        check_nonexpansive(identity(img))


def test_activation_map_is_torus_equivariant():
    space = image_space('img', 6, 6)
    pattern = np.random.default_rng(2).random((3, 3))
    geo = Geo(space, space, lambda x: pattern_activation_map(x, pattern), GroupHom.identity(space.group), 'act')
    assert check_equivariance(geo, sample_group_probe(space, 12, seed=3)).ok


def test_compose_with_identity():
    a, b = three('a'), three('b')
    f = lookup_geo(a, b, [2, 0, 1], name='f')
    assert extensionally_equal(compose(identity(b), f), f)
    assert extensionally_equal(compose(f, identity(a)), f)


def test_compose_chases_indices():
    a, b, c = three('a'), three('b'), three('c')
    f = lookup_geo(a, b, [1, 2, 2], name='f')
    g = lookup_geo(b, c, [0, 0, 1], name='g')
    assert list(compose(g, f).lookup_table()) == [0, 1, 1]


def test_compose_mismatch():
    a, b = three('a'), three('b')
    f = lookup_geo(a, b, [0, 1, 2], name='f')
    with pytest.raises(SpaceMismatchError):
        compose(f, f)


def test_swap_is_a_bijection():
    two, tri = swap_space(), three('tri')
    s = swap(two, tri)
    table = s.geo.lookup_table()
    assert sorted(table) == list(range(6))
    assert s((1, 'c')) == ('c', 1)


def test_copy_and_discard():
    s = swap_space()
    c = copy(s)
    assert c(1) == (1, 1)
    assert isinstance(c.certificate, Validated)
    d = discard(s)
    assert d(0) == ()


def test_tensor_needs_finite_spaces():
    with pytest.raises(UnsupportedSpaceError):
        tensor(identity(image_space('img', 2, 2)), identity(swap_space()))


def test_explicit_hom_is_checked():
    with pytest.raises(HomomorphismError):
        GroupHom.explicit(FiniteGroup.cyclic(3), FiniteGroup.cyclic(3), [0, 2, 2])


def test_declared_geneo_keeps_reason():
    s = swap_space()
    geneo = declare_geneo(lookup_geo(s, s, [1, 0], name='flip'), 'involution')
    assert isinstance(geneo.certificate, Declared)
    assert geneo.certificate.reason == 'involution'


def test_load_geos(tmp_path):
    a, b = three('a'), three('b')
    path = tmp_path / 'geos.json'
    path.write_text(json.dumps({'geos': [{'name': 'f', 'dom': 'a', 'cod': 'b', 'table': [2, 1, 0]}]}))
    geos = load_geos(str(path), {'a': a, 'b': b})
    assert geos['f']('a') == 'c'


@st.composite
def lookup_chain(draw):
    sizes = [draw(st.integers(1, 5)) for _ in range(4)]
    spaces = [finite_space(f's{i}', range(n)) for i, n in enumerate(sizes)]
    geos = [lookup_geo(spaces[i], spaces[i + 1], draw(st.lists(st.integers(0, sizes[i + 1] - 1),
                                                                 min_size=sizes[i], max_size=sizes[i])), name=f'g{i}')
            for i in range(3)]
    return geos


@given(lookup_chain())
def test_composition_is_associative(geos):
    f, g, h = geos
    assert extensionally_equal(compose(h, compose(g, f)), compose(compose(h, g), f))


@given(st.integers(0, 10 ** 6))
def test_equivariant_maps_compose_and_tensor(seed):
    inst = build_point_instance(seed)
    alpha, beta, _ = inst.geos
    assert check_equivariance(alpha).ok
    forward = inst.observer.translations.arrows
    for arrow in forward:
        if arrow.dom == alpha.cod and arrow.cod == alpha.cod:
            assert check_equivariance(compose(arrow.geneo, alpha)).ok
    assert check_equivariance(tensor(alpha, beta)).ok


@given(st.integers(0, 10 ** 6))
def test_validated_composites_stay_nonexpansive(seed):
    rng = np.random.default_rng(seed)
    n, order = int(rng.integers(2, 6)), int(rng.integers(1, 5))
    perm = cyclic_permutation(n, order, rng)
    space = finite_space('x', range(n), group=FiniteGroup.cyclic(order),
                         action_table=np.stack([power(perm, g) for g in range(order)]))
    steps = [check_nonexpansive(lookup_geo(space, space, power(perm, j), name=f'p{j}')) for j in range(3)]
    assert all(isinstance(s, Geneo) for s in steps)
    assert isinstance(check_nonexpansive(compose(steps[2], compose(steps[1], steps[0]))), Geneo)


def test_product_of_tensored_identities_is_identity():
    a, b = swap_space('a'), three('b')
    both = tensor(identity(a), identity(b))
    assert both.dom == product_space(a, b)
    assert all(both(x) == x for x in both.dom.elements)
