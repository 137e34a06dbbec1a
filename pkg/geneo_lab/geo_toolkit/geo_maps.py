"""GEOs, GENEOs and the structural maps of the copy-discard category."""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import LabConfig
from ..errors import GeneoLabError, HomomorphismError, SpaceMismatchError, StructuralError, UnsupportedSpaceError
from ..perception_toolkit import (
    FiniteGroup, PerceptionSpace, element_parts, join_parts, product_space, sample_probes, split_element,
    unit_space,
)

logger = logging.getLogger(__name__)


class _Exhaustive:
    """Sentinel: enumerate every probe of a finite carrier."""

    def __repr__(self):
        return 'EXHAUSTIVE'


EXHAUSTIVE = _Exhaustive()

# Structural maps on finite carriers up to this size get a real exhaustive check.
STRUCTURAL_CHECK_LIMIT = 64


@dataclass(frozen=True, eq=False)
class GroupHom:
    """Group homomorphism stored as an element-index table."""

    source: FiniteGroup
    target: FiniteGroup
    table: np.ndarray
    kind: str = 'explicit'

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64)
        if table.shape != (self.source.order,):
            raise StructuralError(f"Hom table must have {self.source.order} entries, got shape {table.shape}")
        if table.min() < 0 or table.max() >= self.target.order:
            raise StructuralError(f"Hom table entry out of range 0..{self.target.order - 1}")
        table.setflags(write=False)
        object.__setattr__(self, 'table', table)
        if self.kind == 'explicit':
            witness = hom_violation(self.source, self.target, table)
            if witness is not None:
                logger.error(f"Map {self.source.name} -> {self.target.name} is not a homomorphism at {witness}")
                raise HomomorphismError(f"t(g1∘g2) != t(g1)∘t(g2) at (g1, g2) = {witness}")

    @classmethod
    def identity(cls, group: FiniteGroup) -> 'GroupHom':
        return cls(group, group, np.arange(group.order), 'identity')

    @classmethod
    def annihilator(cls, source: FiniteGroup, target: FiniteGroup) -> 'GroupHom':
        """Everything to the target identity."""
        return cls(source, target, np.full(source.order, target.identity), 'annihilator')

    @classmethod
    def explicit(cls, source: FiniteGroup, target: FiniteGroup, table: Sequence[int]) -> 'GroupHom':
        return cls(source, target, np.asarray(table, dtype=np.int64), 'explicit')

    def __call__(self, g: int) -> int:
        return int(self.table[g])

    def then(self, other: 'GroupHom') -> 'GroupHom':
        """``other ∘ self``."""
        if not self.target.same_table(other.source):
            raise SpaceMismatchError(f"Cannot compose homs {self.target.name} / {other.source.name}")
        if self.kind == 'identity':
            return other
        if other.kind == 'identity':
            return self
        kind = 'annihilator' if 'annihilator' in (self.kind, other.kind) else 'explicit'
        if kind == 'annihilator':
            return GroupHom.annihilator(self.source, other.target)
        return GroupHom(self.source, other.target, other.table[self.table], 'composite')

    def tensor(self, other: 'GroupHom') -> 'GroupHom':
        """Componentwise hom between direct products."""
        source = FiniteGroup.direct_product(self.source, other.source)
        target = FiniteGroup.direct_product(self.target, other.target)
        a, b = np.divmod(np.arange(source.order), other.source.order)
        table = self.table[a] * other.target.order + other.table[b]
        kind = 'identity' if self.kind == other.kind == 'identity' else 'composite'
        return GroupHom(source, target, table, kind)


def hom_violation(source: FiniteGroup, target: FiniteGroup, table: np.ndarray) -> Optional[Tuple[int, int]]:
    """First (g1, g2) with t(g1∘g2) != t(g1)∘t(g2), or None."""
    lhs = table[source.compose]
    rhs = target.compose[table[:, None], table[None, :]]
    bad = np.argwhere(lhs != rhs)
    if len(bad):
        return int(bad[0][0]), int(bad[0][1])
    return None


@dataclass(frozen=True, eq=False)
class Geo:
    """Data map plus group homomorphism between two perception spaces.

    ``fn`` is evaluated through ``__call__``, which checks every output
    against the codomain carrier. ``batch_fn`` is an optional vectorized form.
    """

    dom: PerceptionSpace
    cod: PerceptionSpace
    fn: Callable[[Any], Any]
    hom: GroupHom
    name: str = 'geo'
    kind: str = 'builtin'
    batch_fn: Optional[Callable[[Any], Any]] = None
    table: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if not self.hom.source.same_table(self.dom.group):
            raise SpaceMismatchError(f"Geo {self.name}: hom source {self.hom.source.name} "
                                     f"is not the group of {self.dom.id}")
        if not self.hom.target.same_table(self.cod.group):
            raise SpaceMismatchError(f"Geo {self.name}: hom target {self.hom.target.name} "
                                     f"is not the group of {self.cod.id}")

    def __call__(self, x: Any) -> Any:
        y = self.fn(x)
        self.cod.carrier.check(y)
        return y

    def map_batch(self, xs: Sequence[Any]) -> List[Any]:
        if self.batch_fn is not None:
            return list(self.batch_fn(xs))
        return [self(x) for x in xs]

    def lookup_table(self) -> np.ndarray:
        """Codomain index of f(x) for every domain element (finite carriers)."""
        if self.table is not None:
            return self.table
        if not (self.dom.is_finite and self.cod.is_finite):
            raise UnsupportedSpaceError(f"Geo {self.name} is not between finite carriers")
        return np.array([self.cod.carrier.index_of(self(x)) for x in self.dom.elements], dtype=np.int64)

    def __repr__(self):
        return f"Geo({self.name}: {self.dom.id} -> {self.cod.id}, hom={self.hom.kind})"


@dataclass(frozen=True)
class EquivarianceReport:
    """NE = {(g, x): f(g*x) != t(g)*f(x)} restricted to the probe."""

    violations: Tuple[Tuple[int, Any], ...]
    probe_size: int
    exhaustive: bool

    @property
    def ne_count(self) -> int:
        return len(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class ExpansionWitness:
    """A pair whose image is farther apart than the pair itself."""

    first: Any
    second: Any
    distance_in: float
    distance_out: float

    @property
    def ratio(self) -> float:
        if self.distance_in == 0.0:
            return float('inf')
        return self.distance_out / self.distance_in


@dataclass(frozen=True)
class NonExpansiveReport:
    data_violations: Tuple[ExpansionWitness, ...]
    group_violations: Tuple[ExpansionWitness, ...]
    pairs_checked: int
    exhaustive: bool
    method: str = 'probe'

    @property
    def ok(self) -> bool:
        return not (self.data_violations or self.group_violations)

    @property
    def worst_ratio(self) -> float:
        ratios = [w.ratio for w in self.data_violations + self.group_violations]
        return max(ratios) if ratios else 0.0


@dataclass(frozen=True)
class Validated:
    report: NonExpansiveReport


@dataclass(frozen=True)
class Declared:
    """Non-expansiveness asserted by the author; ``sampled`` holds the supporting check, if any."""

    reason: str
    sampled: Optional[NonExpansiveReport] = None


Certificate = Union[Validated, Declared]


@dataclass(frozen=True, eq=False)
class Geneo:
    """A Geo with a non-expansiveness certificate."""

    geo: Geo
    certificate: Certificate

    def __post_init__(self):
        if isinstance(self.certificate, Validated) and not self.certificate.report.ok:
            raise GeneoLabError(f"Geo {self.geo.name}: a Validated certificate must have an empty report")
        if isinstance(self.certificate, Declared) and self.certificate.sampled is not None \
                and not self.certificate.sampled.ok:
            raise GeneoLabError(f"Geo {self.geo.name}: the sampled check refutes the declaration")

    @property
    def dom(self) -> PerceptionSpace:
        return self.geo.dom

    @property
    def cod(self) -> PerceptionSpace:
        return self.geo.cod

    @property
    def name(self) -> str:
        return self.geo.name

    @property
    def hom(self) -> GroupHom:
        return self.geo.hom

    def __call__(self, x: Any) -> Any:
        return self.geo(x)

    def map_batch(self, xs: Sequence[Any]) -> List[Any]:
        return self.geo.map_batch(xs)

    def __repr__(self):
        return f"Geneo({self.geo!r}, {type(self.certificate).__name__})"


GeoLike = Union[Geo, Geneo]


def as_geo(g: GeoLike) -> Geo:
    return g.geo if isinstance(g, Geneo) else g


# -- checks ------------------------------------------------------------------

def sample_group_probe(space: PerceptionSpace, count: int, seed: int = 0) -> List[Tuple[int, Any]]:
    """``count`` random (g, x) pairs for check_equivariance."""
    rng = np.random.default_rng(seed)
    xs = sample_probes(space, count, seed)
    gs = rng.integers(0, space.group.order, size=count)
    return [(int(g), x) for g, x in zip(gs, xs)]


def check_equivariance(geo: GeoLike, domain_sample: Union[_Exhaustive, Sequence[Tuple[int, Any]]] = EXHAUSTIVE,
                       tol: float = LabConfig.METRIC_TOLERANCE) -> EquivarianceReport:
    """Collect every probed (g, x) with d(f(g*x), t(g)*f(x)) > tol."""
    geo = as_geo(geo)
    exhaustive = domain_sample is EXHAUSTIVE
    if exhaustive:
        if not geo.dom.is_finite:
            logger.error(f"Geo {geo.name}: exhaustive equivariance check on an intensional carrier")
            raise UnsupportedSpaceError(f"Geo {geo.name}: EXHAUSTIVE needs a finite domain carrier")
        probe = [(g, x) for g in geo.dom.group.elements for x in geo.dom.elements]
    else:
        probe = list(domain_sample)

    images = {}
    violations = []
    for g, x in probe:
        key = id(x)
        if key not in images:
            images[key] = geo(x)
        lhs = geo(geo.dom.act(g, x))
        rhs = geo.cod.act(geo.hom(g), images[key])
        if geo.cod.distance(lhs, rhs) > tol:
            violations.append((g, x))
    if violations:
        logger.info(f"Geo {geo.name}: {len(violations)} of {len(probe)} probes break equivariance")
    return EquivarianceReport(tuple(violations), len(probe), exhaustive)


def _group_distance_matrix(space: PerceptionSpace, probes: Optional[Sequence[Any]] = None) -> np.ndarray:
    """d_G for every pair of group elements; on intensional carriers a probe-based lower bound."""
    order = space.group.order
    if space.is_finite:
        table = space.action_table
        dist = space.distance_matrix
        out = np.zeros((order, order))
        for g1 in range(order):
            out[g1] = dist[table[g1][None, :], table].max(axis=1)
        return out
    moved = [[space.act(g, x) for x in probes] for g in range(order)]
    out = np.zeros((order, order))
    for g1 in range(order):
        for g2 in range(g1 + 1, order):
            out[g1, g2] = out[g2, g1] = max(space.distance(a, b) for a, b in zip(moved[g1], moved[g2]))
    return out


def check_nonexpansive(geo: GeoLike, pair_sample: Union[_Exhaustive, Sequence[Tuple[Any, Any]]] = EXHAUSTIVE,
                       tol: float = LabConfig.METRIC_TOLERANCE,
                       group_probes: Optional[Sequence[Any]] = None) -> Union[Geneo, NonExpansiveReport]:
    """Check d_Y(f x1, f x2) <= d_X(x1, x2) and d_K(t g1, t g2) <= d_G(g1, g2).

    Returns a Validated Geneo when nothing is violated, otherwise the report.
    On intensional carriers the group condition uses ``group_probes`` (default:
    the first elements of the pair sample) for both sides.
    """
    geo = as_geo(geo)
    exhaustive = pair_sample is EXHAUSTIVE
    if exhaustive:
        if not geo.dom.is_finite:
            logger.error(f"Geo {geo.name}: exhaustive non-expansiveness check on an intensional carrier")
            raise UnsupportedSpaceError(f"Geo {geo.name}: EXHAUSTIVE needs a finite domain carrier")
        xs = geo.dom.elements
        pairs = [(xs[i], xs[j]) for i in range(len(xs)) for j in range(i + 1, len(xs))]
    else:
        pairs = list(pair_sample)

    data_violations = []
    cache = {}

    def image(x):
        if id(x) not in cache:
            cache[id(x)] = geo(x)
        return cache[id(x)]

    for x1, x2 in pairs:
        d_in = geo.dom.distance(x1, x2)
        d_out = geo.cod.distance(image(x1), image(x2))
        if d_out > d_in + tol:
            data_violations.append(ExpansionWitness(x1, x2, d_in, d_out))

    group_violations = []
    t = geo.hom.table
    moved_pairs = np.argwhere(t[:, None] != t[None, :])
    if len(moved_pairs):
        if geo.dom.is_finite and geo.cod.is_finite:
            d_g = _group_distance_matrix(geo.dom)
            d_k = _group_distance_matrix(geo.cod)
        else:
            probes = list(group_probes) if group_probes is not None else [p[0] for p in pairs[:8]]
            if not probes:
                raise GeneoLabError(f"Geo {geo.name}: group condition needs probes on an intensional carrier")
            d_g = _group_distance_matrix(geo.dom, probes)
            d_k = _group_distance_matrix(geo.cod, [image(x) for x in probes])
        for g1, g2 in moved_pairs:
            if g1 < g2 and d_k[t[g1], t[g2]] > d_g[g1, g2] + tol:
                group_violations.append(ExpansionWitness(int(g1), int(g2), float(d_g[g1, g2]),
                                                         float(d_k[t[g1], t[g2]])))

    report = NonExpansiveReport(tuple(data_violations), tuple(group_violations), len(pairs), exhaustive)
    if report.ok:
        return Geneo(geo, Validated(report))
    logger.info(f"Geo {geo.name}: expansive, worst ratio {report.worst_ratio}")
    return report


def declare_geneo(geo: GeoLike, reason: str, pair_sample: Optional[Sequence[Tuple[Any, Any]]] = None) -> Geneo:
    """Admit ``geo`` as a GENEO on the author's word, backed by a sampled check when pairs are given."""
    geo = as_geo(geo)
    sampled = None
    if pair_sample is not None:
        result = check_nonexpansive(geo, pair_sample)
        sampled = result.certificate.report if isinstance(result, Geneo) else result
    logger.info(f"Geo {geo.name}: declared GENEO ({reason})")
    return Geneo(geo, Declared(reason, sampled))


def _structural(geo: Geo) -> Geneo:
    if geo.dom.is_finite and geo.dom.carrier.size <= STRUCTURAL_CHECK_LIMIT:
        result = check_nonexpansive(geo)
        if isinstance(result, Geneo):
            return result
        raise GeneoLabError(f"Structural map {geo.name} failed its own check")
    report = NonExpansiveReport((), (), 0, True, method='structural')
    return Geneo(geo, Validated(report))


# -- constructors and combinators ----------------------------------------------

def lookup_geo(dom: PerceptionSpace, cod: PerceptionSpace, table: Sequence[int],
               hom: Optional[GroupHom] = None, name: str = 'lookup') -> Geo:
    """Geo over finite carriers given by the codomain index of each domain element.

    The hom defaults to the identity when both spaces share a group, else the annihilator.
    """
    if not (dom.is_finite and cod.is_finite):
        raise UnsupportedSpaceError(f"Lookup Geo {name} needs finite carriers")
    table = np.asarray(table, dtype=np.int64)
    if table.shape != (dom.carrier.size,):
        raise StructuralError(f"Lookup Geo {name}: table needs {dom.carrier.size} entries, got {table.shape}")
    if table.min() < 0 or table.max() >= cod.carrier.size:
        raise StructuralError(f"Lookup Geo {name}: entry out of range 0..{cod.carrier.size - 1}")
    table.setflags(write=False)
    if hom is None:
        hom = GroupHom.identity(dom.group) if dom.group.same_table(cod.group) \
            else GroupHom.annihilator(dom.group, cod.group)
    elements = cod.carrier.elements
    index_of = dom.carrier.index_of
    return Geo(dom, cod, lambda x: elements[table[index_of(x)]], hom, name, 'lookup', table=table)


def compose(g2: GeoLike, g1: GeoLike) -> Geo:
    """Run ``g1`` then ``g2``."""
    g1, g2 = as_geo(g1), as_geo(g2)
    if g1.cod != g2.dom:
        logger.error(f"Cannot compose {g1.name}: {g1.cod.id} with {g2.name}: {g2.dom.id}")
        raise SpaceMismatchError(f"cod({g1.name}) = {g1.cod.id} != dom({g2.name}) = {g2.dom.id}")
    hom = g1.hom.then(g2.hom)
    name = f'{g1.name};{g2.name}'
    if g1.table is not None and g2.table is not None:
        return lookup_geo(g1.dom, g2.cod, g2.table[g1.table], hom, name)
    batch = None
    if g1.batch_fn is not None or g2.batch_fn is not None:
        batch = lambda xs: g2.map_batch(g1.map_batch(xs))  # noqa: E731
    return Geo(g1.dom, g2.cod, lambda x: g2(g1(x)), hom, name, 'composite', batch)


def tensor(g1: GeoLike, g2: GeoLike) -> Geo:
    """Componentwise action on product spaces."""
    g1, g2 = as_geo(g1), as_geo(g2)
    dom = product_space(g1.dom, g2.dom)
    cod = product_space(g1.cod, g2.cod)
    left, right = g1.dom.arity, g2.dom.arity

    def fn(x):
        xl, xr = split_element(x, left, right)
        return join_parts(element_parts(g1(xl), g1.cod.arity) + element_parts(g2(xr), g2.cod.arity))

    return Geo(dom, cod, fn, g1.hom.tensor(g2.hom), f'({g1.name}*{g2.name})', 'composite')


def identity(space: PerceptionSpace) -> Geneo:
    geo = Geo(space, space, lambda x: x, GroupHom.identity(space.group), f'id[{space.id}]', 'structural',
              batch_fn=lambda xs: list(xs))
    return _structural(geo)


def copy(space: PerceptionSpace) -> Geneo:
    """x ↦ (x, x)."""
    cod = product_space(space, space)
    arity = space.arity
    order = space.group.order
    hom = GroupHom(space.group, cod.group, np.arange(order) * (order + 1), 'diagonal')
    fn = lambda x: join_parts(element_parts(x, arity) * 2)  # noqa: E731
    return _structural(Geo(space, cod, fn, hom, f'copy[{space.id}]', 'structural'))


def discard(space: PerceptionSpace) -> Geneo:
    """x ↦ () in the unit space."""
    unit = unit_space()
    geo = Geo(space, unit, lambda x: (), GroupHom.annihilator(space.group, unit.group),
              f'discard[{space.id}]', 'structural')
    return _structural(geo)


def swap(a: PerceptionSpace, b: PerceptionSpace) -> Geneo:
    """(x, y) ↦ (y, x)."""
    dom = product_space(a, b)
    cod = product_space(b, a)
    ga, gb = np.divmod(np.arange(dom.group.order), b.group.order)
    hom = GroupHom(dom.group, cod.group, gb * a.group.order + ga, 'swap')

    def fn(x):
        xa, xb = split_element(x, a.arity, b.arity)
        return join_parts(element_parts(xb, b.arity) + element_parts(xa, a.arity))

    return _structural(Geo(dom, cod, fn, hom, f'swap[{a.id},{b.id}]', 'structural'))


def extensionally_equal(a: GeoLike, b: GeoLike, probes: Optional[Sequence[Any]] = None,
                        tol: float = LabConfig.METRIC_TOLERANCE) -> bool:
    """Same values on every finite-carrier element (or on ``probes``)."""
    a, b = as_geo(a), as_geo(b)
    if a.dom != b.dom or a.cod != b.cod:
        return False
    if probes is None:
        probes = a.dom.elements
    return all(a.cod.distance(a(x), b(x)) <= tol for x in probes)
