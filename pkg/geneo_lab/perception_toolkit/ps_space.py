"""Perception spaces: pseudo-metric carriers with isometric finite-group actions."""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import LabConfig
from ..errors import GeneoLabError, MetricAxiomError, StructuralError, UnsupportedSpaceError
from .ps_groups import FiniteGroup, group_law_violations

logger = logging.getLogger(__name__)

INF = math.inf


def metric_value(value: float) -> float:
    """Coerce a distance to an extended nonnegative real, rejecting NaN and negatives."""
    value = float(value)
    if math.isnan(value) or value < 0.0:
        raise GeneoLabError(f"Not a metric value: {value}")
    return value


def freeze(element: Any) -> Hashable:
    """Turn lists/arrays into nested tuples so finite-carrier elements are hashable."""
    if isinstance(element, np.ndarray):
        return freeze(element.tolist())
    if isinstance(element, (list, tuple)):
        return tuple(freeze(e) for e in element)
    if isinstance(element, set):
        return frozenset(freeze(e) for e in element)
    return element


# -- flat tensor elements --------------------------------------------------

def element_parts(x: Any, arity: int) -> tuple:
    """Split an element of an arity-k space into its k factor components."""
    if arity == 0:
        return ()
    if arity == 1:
        return (x,)
    return tuple(x)


def join_parts(parts: Sequence) -> Any:
    """Inverse of ``element_parts``."""
    if len(parts) == 1:
        return parts[0]
    return tuple(parts)


# -- carriers ----------------------------------------------------------------

class FiniteCarrier:
    """An indexed list of elements (indices dense 0..n-1)."""

    is_finite = True

    def __init__(self, elements: Iterable[Any], element_kind: str = 'token'):
        self.elements = tuple(freeze(e) for e in elements)
        self.element_kind = element_kind
        if not self.elements:
            raise StructuralError("A finite carrier needs at least one element")
        self._index = {}
        for i, e in enumerate(self.elements):
            if e in self._index:
                raise StructuralError(f"Duplicate carrier element: {e!r}")
            self._index[e] = i

    @property
    def size(self) -> int:
        return len(self.elements)

    def index_of(self, x: Any) -> int:
        key = freeze(x) if isinstance(x, (list, np.ndarray)) else x
        try:
            return self._index[key]
        except (KeyError, TypeError):
            raise StructuralError(f"Element {x!r} is not in the carrier") from None

    def contains(self, x: Any) -> bool:
        try:
            self.index_of(x)
            return True
        except StructuralError:
            return False

    def check(self, x: Any) -> None:
        self.index_of(x)

    def __repr__(self):
        return f"FiniteCarrier(size={self.size}, kind={self.element_kind})"


class ImageCarrier:
    """All height×width grayscale images with entries in [0, 1] (intensional)."""

    is_finite = False

    def __init__(self, height: int, width: int, element_kind: str = 'image'):
        if height < 1 or width < 1:
            raise StructuralError(f"Image carrier needs positive dims, got {height}x{width}")
        self.height = height
        self.width = width
        self.element_kind = element_kind

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    def check(self, x: Any) -> None:
        x = np.asarray(x)
        if x.shape != self.shape:
            raise StructuralError(f"Expected a {self.height}x{self.width} image, got shape {x.shape}")
        if np.isnan(x).any() or x.min() < 0.0 or x.max() > 1.0:
            raise StructuralError("Image entries must lie in [0, 1]")

    def contains(self, x: Any) -> bool:
        try:
            self.check(x)
            return True
        except StructuralError:
            return False

    def random_elements(self, count: int, rng: np.random.Generator) -> List[np.ndarray]:
        return list(rng.random((count, self.height, self.width)))

    def __repr__(self):
        return f"ImageCarrier({self.height}x{self.width}, kind={self.element_kind})"


Carrier = Union[FiniteCarrier, ImageCarrier]


# -- pseudo-metrics --------------------------------------------------------

def _same(x: Any, y: Any) -> bool:
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        return bool(np.array_equal(x, y))
    return x == y


class PseudoMetric:
    """Base class; ``between`` returns d(x, y) for two carrier elements."""

    kind = 'abstract'

    def between(self, carrier: Carrier, x: Any, y: Any) -> float:
        raise NotImplementedError

    def __repr__(self):
        return f"{self.__class__.__name__}()"


class DiscreteMetric(PseudoMetric):
    """0 iff equal, else 1."""

    kind = 'discrete'

    def between(self, carrier, x, y):
        return 0.0 if _same(x, y) else 1.0


class L1Metric(PseudoMetric):
    kind = 'l1'

    def between(self, carrier, x, y):
        return float(np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)).sum())


class LInfinityMetric(PseudoMetric):
    """Sup-norm over entries."""

    kind = 'linf'

    def between(self, carrier, x, y):
        diff = np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))
        return float(diff.max()) if diff.size else 0.0


class ArgmaxDiscreteMetric(PseudoMetric):
    """Discrete metric on predicted classes: score vectors compare by argmax, labels directly."""

    kind = 'argmax'

    @staticmethod
    def label(x: Any) -> Any:
        arr = np.asarray(x)
        if arr.ndim == 0:
            return arr.item()
        return int(np.argmax(arr.ravel()))

    def between(self, carrier, x, y):
        return 0.0 if self.label(x) == self.label(y) else 1.0


def metric_table_violations(table: np.ndarray, tol: float = LabConfig.METRIC_TOLERANCE) -> List[Tuple[str, tuple]]:
    """Exhaustive (R), (S), (T) check of a distance matrix; witnesses are index tuples."""
    violations = []
    n = table.shape[0]
    for i in np.nonzero(np.abs(np.diag(table)) > tol)[0]:
        violations.append(('reflexivity', (int(i),)))
    for i, j in zip(*np.nonzero(np.abs(table - table.T) > tol)):
        if i < j:
            violations.append(('symmetry', (int(i), int(j))))
    with np.errstate(invalid='ignore'):
        for k in range(n):
            via = table[:, k][:, None] + table[k, :][None, :]
            for i, j in zip(*np.nonzero(table > via + tol)):
                violations.append(('triangle', (int(i), int(j), int(k))))
    return violations


class ExplicitTableMetric(PseudoMetric):
    """n×n distance table over a finite carrier, validated at construction."""

    kind = 'table'

    def __init__(self, table: Any, strict: bool = True):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise StructuralError(f"Distance table must be square, got shape {table.shape}")
        if np.isnan(table).any() or (table < 0).any():
            raise StructuralError("Distance table entries must be nonnegative numbers")
        table.setflags(write=False)
        self.table = table
        self.strict = strict
        if strict:
            violations = metric_table_violations(table)
            if violations:
                axiom, witness = violations[0]
                logger.error(f"Distance table violates {axiom} at {witness}")
                raise MetricAxiomError(f"Distance table violates {axiom} at {witness} "
                                       f"({len(violations)} violations in total)")

    def between(self, carrier, x, y):
        return float(self.table[carrier.index_of(x), carrier.index_of(y)])

    def __repr__(self):
        return f"ExplicitTableMetric(n={self.table.shape[0]})"


class ProductMetric(PseudoMetric):
    """max of the two component metrics."""

    kind = 'product'

    def __init__(self, left: 'PerceptionSpace', right: 'PerceptionSpace'):
        self.left = left
        self.right = right

    def between(self, carrier, x, y):
        xl, xr = split_element(x, self.left.arity, self.right.arity)
        yl, yr = split_element(y, self.left.arity, self.right.arity)
        return max(self.left.distance(xl, yl), self.right.distance(xr, yr))


def split_element(x: Any, left_arity: int, right_arity: int) -> Tuple[Any, Any]:
    parts = element_parts(x, left_arity + right_arity)
    return join_parts(parts[:left_arity]), join_parts(parts[left_arity:])


# -- group actions ---------------------------------------------------------

class GroupAction:
    kind = 'abstract'

    def act(self, space: 'PerceptionSpace', g: int, x: Any) -> Any:
        raise NotImplementedError


class PermutationAction(GroupAction):
    """order×n table of element indices; row g is the permutation induced by g."""

    kind = 'table'

    def __init__(self, table: Any):
        table = np.asarray(table, dtype=np.int64)
        if table.ndim != 2:
            raise StructuralError(f"Action table must be 2-dimensional, got shape {table.shape}")
        table.setflags(write=False)
        self.table = table

    def act(self, space, g, x):
        return space.carrier.elements[self.table[g, space.carrier.index_of(x)]]


class TorusTranslationAction(GroupAction):
    """Z_{h/s} × Z_{w/s} acting on images by the cyclic shift (s·i, s·j)."""

    kind = 'torus'

    def __init__(self, stride: int = 1):
        self.stride = stride

    def shift_of(self, space: 'PerceptionSpace', g: int) -> Tuple[int, int]:
        cols = space.carrier.width // self.stride
        i, j = divmod(int(g), cols)
        return self.stride * i, self.stride * j

    def act(self, space, g, x):
        return np.roll(x, self.shift_of(space, g), axis=(-2, -1))


class TrivialAction(GroupAction):
    kind = 'trivial'

    def act(self, space, g, x):
        return x


class ProductAction(GroupAction):
    """Pointwise action of the direct product group."""

    kind = 'product'

    def __init__(self, left: 'PerceptionSpace', right: 'PerceptionSpace'):
        self.left = left
        self.right = right

    def act(self, space, g, x):
        gl, gr = divmod(int(g), self.right.group.order)
        xl, xr = split_element(x, self.left.arity, self.right.arity)
        parts = element_parts(self.left.act(gl, xl), self.left.arity) + \
            element_parts(self.right.act(gr, xr), self.right.arity)
        return join_parts(parts)


# -- spaces ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PerceptionSpace:
    """Carrier + pseudo-metric + finite group + action.

    ``arity`` is the number of tensor factors: 0 for the unit space, 1 for a
    basic space, the sum of the factors for a product. Elements of a space
    with arity >= 2 are flat tuples with one component per factor.
    """

    id: str
    carrier: Carrier
    metric: PseudoMetric
    group: FiniteGroup
    action: GroupAction
    arity: int = field(default=1)

    def __eq__(self, other):
        return isinstance(other, PerceptionSpace) and self.id == other.id

    def __hash__(self):
        return hash(self.id)

    @property
    def is_finite(self) -> bool:
        return self.carrier.is_finite

    @property
    def elements(self) -> tuple:
        if not self.is_finite:
            raise UnsupportedSpaceError(f"Space {self.id} has an intensional carrier")
        return self.carrier.elements

    def distance(self, x: Any, y: Any) -> float:
        return self.metric.between(self.carrier, x, y)

    def act(self, g: int, x: Any) -> Any:
        return self.action.act(self, g, x)

    @cached_property
    def action_table(self) -> np.ndarray:
        """order×n index table of the action (finite carriers only)."""
        if isinstance(self.action, PermutationAction):
            return self.action.table
        n = self.carrier.size
        table = np.empty((self.group.order, n), dtype=np.int64)
        for g in self.group.elements:
            for i, x in enumerate(self.elements):
                table[g, i] = self.carrier.index_of(self.act(g, x))
        table.setflags(write=False)
        return table

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """n×n matrix of pairwise distances (finite carriers only)."""
        if isinstance(self.metric, ExplicitTableMetric):
            return self.metric.table
        elements = self.elements
        n = len(elements)
        table = np.zeros((n, n), dtype=np.float64)
        for i in range(n):
            for j in range(n):
                table[i, j] = self.distance(elements[i], elements[j])
        table.setflags(write=False)
        return table

    def __repr__(self):
        return f"PerceptionSpace({self.id!r}, {self.carrier!r}, {self.metric!r}, group={self.group.name})"


def finite_space(space_id: str, elements: Sequence[Any], metric: Optional[PseudoMetric] = None,
                 group: Optional[FiniteGroup] = None, action_table: Optional[Any] = None,
                 element_kind: str = 'token') -> PerceptionSpace:
    """Build a finite space; the group defaults to the trivial group."""
    carrier = FiniteCarrier(elements, element_kind)
    group = group or FiniteGroup.trivial()
    if action_table is None:
        action_table = np.tile(np.arange(carrier.size), (group.order, 1))
    return PerceptionSpace(space_id, carrier, metric or DiscreteMetric(), group, PermutationAction(action_table))


def image_space(space_id: str, height: int, width: int, stride: int = 1, translations: bool = True,
                metric: Optional[PseudoMetric] = None) -> PerceptionSpace:
    """Intensional image space with torus translations (or the trivial group)."""
    carrier = ImageCarrier(height, width)
    metric = metric or LInfinityMetric()
    if not translations:
        return PerceptionSpace(space_id, carrier, metric, FiniteGroup.trivial(), TrivialAction())
    if height % stride or width % stride:
        raise StructuralError(f"Stride {stride} does not divide {height}x{width}")
    group = FiniteGroup.torus(height // stride, width // stride)
    return PerceptionSpace(space_id, carrier, metric, group, TorusTranslationAction(stride))


def score_space(space_id: str = 'scores', classes: int = 10) -> PerceptionSpace:
    """Score vectors as 1×classes images, compared by argmax."""
    carrier = ImageCarrier(1, classes, element_kind='scores')
    return PerceptionSpace(space_id, carrier, ArgmaxDiscreteMetric(), FiniteGroup.trivial(), TrivialAction())


def class_label_space(space_id: str = 'labels', classes: int = 10) -> PerceptionSpace:
    """Class labels 0..classes-1 with the discrete metric and the trivial group."""
    return finite_space(space_id, range(classes), DiscreteMetric(), element_kind='label')


def unit_space() -> PerceptionSpace:
    """The tensor unit: one element ``()``, trivial group, arity 0."""
    return PerceptionSpace('I', FiniteCarrier([()], 'unit'), DiscreteMetric(), FiniteGroup.trivial(),
                           PermutationAction([[0]]), arity=0)


def orbit_space(space_id: str, seeds: Iterable[Any], group: FiniteGroup, act: Callable[[int, Any], Any],
                metric: Optional[PseudoMetric] = None, element_kind: str = 'token') -> PerceptionSpace:
    """Close ``seeds`` under ``act`` and tabulate the action."""
    elements: List[Hashable] = []
    seen: Dict[Hashable, int] = {}
    queue = [freeze(s) for s in seeds]
    while queue:
        x = queue.pop(0)
        if x in seen:
            continue
        seen[x] = len(elements)
        elements.append(x)
        for g in group.elements:
            y = freeze(act(g, x))
            if y not in seen:
                queue.append(y)
    table = np.array([[seen[freeze(act(g, x))] for x in elements] for g in group.elements], dtype=np.int64)
    return finite_space(space_id, elements, metric, group, table, element_kind)


def product_space(a: PerceptionSpace, b: PerceptionSpace) -> PerceptionSpace:
    """Tensor of two spaces: cartesian carrier, max metric, direct product group.

    The unit space is absorbed on either side; otherwise both carriers must be finite.
    """
    if a.arity == 0:
        return b
    if b.arity == 0:
        return a
    if not (a.is_finite and b.is_finite):
        raise UnsupportedSpaceError(f"Product {a.id} ⊗ {b.id} needs two finite carriers")
    elements = [join_parts(element_parts(x, a.arity) + element_parts(y, b.arity))
                for x, y in product(a.elements, b.elements)]
    carrier = FiniteCarrier(elements, 'tuple')
    group = FiniteGroup.direct_product(a.group, b.group)
    return PerceptionSpace(f'{a.id}⊗{b.id}', carrier, ProductMetric(a, b), group, ProductAction(a, b),
                           arity=a.arity + b.arity)


def sample_probes(space: PerceptionSpace, count: int, seed: int = 0) -> List[Any]:
    """Draw ``count`` elements: uniform indices (finite) or uniform-[0,1] images (intensional)."""
    rng = np.random.default_rng(seed)
    if space.is_finite:
        return [space.elements[i] for i in rng.integers(0, space.carrier.size, size=count)]
    return space.carrier.random_elements(count, rng)


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    axiom: str
    witness: tuple


@dataclass(frozen=True)
class ValidationReport:
    """Every violated axiom with a witness; empty means valid within the probe budget."""

    space_id: str
    violations: Tuple[Violation, ...]
    exhaustive: bool
    probes: int

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def witnesses(self) -> List[Tuple[str, tuple]]:
        return [(v.axiom, v.witness) for v in self.violations]

    def axioms(self) -> set:
        return {v.axiom for v in self.violations}


def _check_structure(space: PerceptionSpace) -> None:
    if space.is_finite:
        n = space.carrier.size
        if isinstance(space.action, PermutationAction):
            table = space.action.table
            if table.shape != (space.group.order, n):
                raise StructuralError(f"Space {space.id}: action table shape {table.shape}, "
                                      f"expected {(space.group.order, n)}")
            if table.min() < 0 or table.max() >= n:
                raise StructuralError(f"Space {space.id}: action table entry out of range 0..{n - 1}")
        if isinstance(space.metric, ExplicitTableMetric) and space.metric.table.shape != (n, n):
            raise StructuralError(f"Space {space.id}: distance table shape {space.metric.table.shape}, "
                                  f"expected {(n, n)}")
    elif isinstance(space.action, (PermutationAction, ProductAction)):
        raise StructuralError(f"Space {space.id}: tabulated action on an intensional carrier")
    elif isinstance(space.metric, ExplicitTableMetric):
        raise StructuralError(f"Space {space.id}: distance table on an intensional carrier")


def validate_space(space: PerceptionSpace, probe_budget: int = LabConfig.DEFAULT_PROBE_BUDGET,
                   probes: Optional[Sequence[Any]] = None, seed: int = 0) -> ValidationReport:
    """Check group laws, action laws, metric axioms and isometry.

    Finite carriers with ``|X|·|G|² <= probe_budget`` are checked exhaustively;
    otherwise group-element pairs are sampled. Intensional carriers are checked
    on ``probes`` (random images when not given).
    """
    _check_structure(space)
    tol = LabConfig.METRIC_TOLERANCE
    found = set()
    group = space.group
    order = group.order
    rng = np.random.default_rng(seed)

    law_violations, groups_exhaustive = group_law_violations(group, max_triples=probe_budget, seed=seed)
    for axiom, witness in law_violations:
        found.add(Violation(axiom, witness))

    if space.is_finite:
        n = space.carrier.size
        table = space.action_table
        dist = space.distance_matrix
        exhaustive = n * order * order <= probe_budget and groups_exhaustive
        for x in np.nonzero(table[group.identity] != np.arange(n))[0]:
            found.add(Violation('action identity', (int(x),)))
        if exhaustive:
            pairs = [(g1, g2) for g1 in range(order) for g2 in range(order)]
        else:
            count = max(1, probe_budget // n)
            pairs = list(zip(rng.integers(0, order, count).tolist(), rng.integers(0, order, count).tolist()))
        for g1, g2 in pairs:
            lhs = table[group.compose[g1, g2]]
            rhs = table[g1][table[g2]]
            for x in np.nonzero(lhs != rhs)[0]:
                found.add(Violation('action compatibility', (g1, g2, int(x))))
        for axiom, witness in metric_table_violations(np.asarray(dist), tol):
            found.add(Violation(axiom, witness))
        for g in range(order):
            moved = dist[table[g][:, None], table[g][None, :]]
            for x1, x2 in zip(*np.nonzero(np.abs(moved - dist) > tol)):
                found.add(Violation('isometry', (g, int(x1), int(x2))))
        probe_count = n
    else:
        exhaustive = False
        probes = list(probes) if probes is not None else sample_probes(space, 8, seed)
        probe_count = len(probes)
        if not probes:
            raise GeneoLabError(f"Space {space.id}: intensional validation needs probes")
        samples = max(1, probe_budget // max(1, probe_count))
        g1s = rng.integers(0, order, samples).tolist()
        g2s = rng.integers(0, order, samples).tolist()
        for i, x in enumerate(probes):
            if not _same(space.act(group.identity, x), x):
                found.add(Violation('action identity', (i,)))
        for g1, g2 in zip(g1s, g2s):
            i = int(rng.integers(0, probe_count))
            x = probes[i]
            lhs = space.act(group.mul(g1, g2), x)
            rhs = space.act(g1, space.act(g2, x))
            if space.distance(lhs, rhs) > tol or not _same(lhs, rhs):
                found.add(Violation('action compatibility', (g1, g2, i)))
        dist = np.array([[space.distance(x, y) for y in probes] for x in probes])
        for axiom, witness in metric_table_violations(dist, tol):
            found.add(Violation(axiom, witness))
        for g in g1s:
            moved = [space.act(g, x) for x in probes]
            for i in range(probe_count):
                for j in range(i + 1, probe_count):
                    if abs(space.distance(moved[i], moved[j]) - dist[i, j]) > tol:
                        found.add(Violation('isometry', (g, i, j)))

    violations = tuple(sorted(found, key=lambda v: (v.axiom, v.witness)))
    if violations:
        logger.info(f"Space {space.id}: {len(violations)} violations")
    return ValidationReport(space.id, violations, exhaustive, probe_count)


@dataclass(frozen=True)
class GroupDistance:
    """d_G(g1, g2); ``lower_bound`` is set when the sup was taken over probes only."""

    value: float
    lower_bound: bool


def induced_group_metric(space: PerceptionSpace, g1: int, g2: int,
                         probes: Optional[Sequence[Any]] = None) -> GroupDistance:
    """sup over x of d(g1*x, g2*x): exact on finite carriers, a flagged lower bound on probes otherwise."""
    order = space.group.order
    if not (0 <= g1 < order and 0 <= g2 < order):
        raise StructuralError(f"Group elements ({g1}, {g2}) out of range 0..{order - 1}")
    if space.is_finite:
        table = space.action_table
        dist = space.distance_matrix
        value = float(dist[table[g1], table[g2]].max())
        return GroupDistance(metric_value(value), False)
    if not probes:
        raise GeneoLabError(f"Space {space.id}: d_G on an intensional carrier needs a nonempty probe set")
    value = max(space.distance(space.act(g1, x), space.act(g2, x)) for x in probes)
    return GroupDistance(metric_value(value), True)
