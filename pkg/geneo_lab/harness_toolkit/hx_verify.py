"""Randomized property suites behind ``geneo-lab verify``.

Every suite draws its instances from one base seed, so a failing instance can
be rebuilt from the seed printed next to it. The instance builders are public
and the hypothesis tests drive them directly.
"""
import logging
import time
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import LabConfig
from ..diagram_toolkit import (
    ComplexityAssignment, Copy, DiagramAst, Discard, Gen, GeneratorDecl, Id, Interpretation, Par, Seq, Swap,
    complexity, evaluate_semantics, format_diagram, format_word, par_all, parse, typecheck, word_space,
)
from ..errors import CategoryValidationError, GeneoLabError, UnknownSuiteError
from ..geo_toolkit import Geo, GroupHom, declare_geneo, extensionally_equal, lookup_geo
from ..observer_toolkit import (
    Arrow, EvaluationSet, Observer, TranslationCategory, equivariance_lower_bound, surrogate_distance,
)
from ..perception_toolkit import (
    ExplicitTableMetric, FiniteGroup, PerceptionSpace, class_label_space, finite_space, image_space,
)
from ..surrogate_toolkit import (
    CnnModel, Geo1Model, Geo2Model, MlpModel, SurrogateModel, bank_from_arrays, load_mnist_split,
    loss_and_grad, sample_patterns,
)

logger = logging.getLogger(__name__)

TRIANGLE_TOLERANCE = 1e-9
ORDER_TOLERANCE = 1e-12
GRADIENT_STEP = 1e-4
GRADIENT_TOLERANCE = 1e-4
SCORE_TOLERANCE = 1e-6
GRID = 5
INJECTED_ARROW = 'inflate'


@dataclass
class SuiteResult:
    name: str
    instances: int
    failures: List[str] = field(default_factory=list)
    stats: Dict[str, float] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures


def instance_seeds(seed: int, count: int) -> List[int]:
    rng = np.random.default_rng(seed)
    return [int(s) for s in rng.integers(0, 2 ** 31 - 1, size=count)]


# -- point sets under a cyclic group -----------------------------------------------------

def cyclic_permutation(n: int, order: int, rng: np.random.Generator) -> Tuple[int, ...]:
    """Random permutation of ``range(n)`` whose cycle lengths all divide ``order``."""
    divisors = [d for d in range(1, order + 1) if order % d == 0]
    items = [int(i) for i in rng.permutation(n)]
    perm = list(range(n))
    while items:
        fitting = [d for d in divisors if d <= len(items)]
        length = fitting[rng.integers(len(fitting))]
        cycle, items = items[:length], items[length:]
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            perm[a] = b
    return tuple(perm)


def power(perm: Sequence[int], j: int) -> np.ndarray:
    out = np.arange(len(perm))
    step = np.asarray(perm)
    for _ in range(j):
        out = step[out]
    return out


def cycle_length(perm: Sequence[int], i: int) -> int:
    length, j = 1, perm[i]
    while j != i:
        length, j = length + 1, perm[j]
    return length


def point_space(space_id: str, points: Sequence[Tuple[int, int]], perm: Sequence[int], order: int,
                scale: float = 1.0) -> PerceptionSpace:
    """Grid points 0..n-1 under Z_order acting by powers of ``perm``.

    The distance is the largest L1 gap over the orbit of the pair, which makes
    every power of ``perm`` an isometry.
    """
    coords = np.asarray(points, dtype=np.float64)
    action = np.stack([power(perm, g) for g in range(order)])
    l1 = np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=2)
    table = np.max([l1[np.ix_(row, row)] for row in action], axis=0)
    return finite_space(space_id, range(len(points)), ExplicitTableMetric(scale * table),
                        FiniteGroup.cyclic(order), action)


def equivariant_lookup(dom: PerceptionSpace, cod: PerceptionSpace, perm: Sequence[int],
                       rng: np.random.Generator, name: str) -> Geo:
    """Send each orbit representative to a point whose cycle length divides the orbit's, then extend."""
    table = np.full(len(perm), -1)
    for x0 in range(len(perm)):
        if table[x0] >= 0:
            continue
        length = cycle_length(perm, x0)
        fitting = [y for y in range(len(perm)) if length % cycle_length(perm, y) == 0]
        x, y = x0, fitting[rng.integers(len(fitting))]
        for _ in range(length):
            table[x] = y
            x, y = perm[x], perm[y]
    return lookup_geo(dom, cod, table, GroupHom.identity(dom.group), name)


def injected_arrow(space: PerceptionSpace, points, perm, order) -> Tuple[PerceptionSpace, Arrow]:
    """The identity map into a copy of ``space`` with doubled distances, declared non-expansive."""
    doubled = point_space(f'{space.id}_x2', points, perm, order, scale=2.0)
    geo = lookup_geo(space, doubled, np.arange(space.carrier.size), GroupHom.identity(space.group),
                     INJECTED_ARROW)
    return doubled, Arrow(INJECTED_ARROW, declare_geneo(geo, 'injected'), 'lookup')


@dataclass
class PointInstance:
    """Three equivariant maps X -> Y compared through powers of the acting permutation."""

    seed: int
    points: Tuple[Tuple[int, int], ...]
    order: int
    perm: Tuple[int, ...]
    observer: Observer
    geos: Tuple[Geo, Geo, Geo]
    eval_set: EvaluationSet

    def describe(self) -> str:
        return f"seed {self.seed}: points {list(self.points)}, Z{self.order} acting by {list(self.perm)}"


def _draw_points(rng: np.random.Generator) -> Tuple[Tuple[Tuple[int, int], ...], int, Tuple[int, ...]]:
    n = int(rng.integers(2, 7))
    cells = rng.choice(GRID * GRID, size=n, replace=False)
    points = tuple((int(c) // GRID, int(c) % GRID) for c in cells)
    order = int(rng.integers(1, 5))
    return points, order, cyclic_permutation(n, order, rng)


def build_point_instance(seed: int, inject_expansive: bool = False) -> PointInstance:
    rng = np.random.default_rng(seed)
    points, order, perm = _draw_points(rng)
    x_space = point_space('X', points, perm, order)
    y_space = finite_space('Y', range(len(points)), None, FiniteGroup.cyclic(order),
                           np.stack([power(perm, g) for g in range(order)]))
    arrows = []
    for j in range(1, order):
        arrows.append(Arrow(f'fx{j}', declare_geneo(lookup_geo(x_space, x_space, power(perm, j),
                                                               name=f'fx{j}'), 'isometry'), 'lookup'))
    for j in range(1, order):
        arrows.append(Arrow(f'by{j}', declare_geneo(lookup_geo(y_space, y_space, power(perm, j),
                                                               name=f'by{j}'), 'isometry'), 'lookup'))
    fixed = [i for i in range(len(perm)) if perm[i] == i]
    if fixed:
        const = lookup_geo(y_space, y_space, np.full(len(perm), fixed[0]), GroupHom.identity(y_space.group), 'const')
        arrows.append(Arrow('const', declare_geneo(const, 'constant'), 'lookup'))
    objects = [x_space, y_space]
    if inject_expansive:
        doubled, arrow = injected_arrow(x_space, points, perm, order)
        objects.append(doubled)
        arrows.append(arrow)
    category = TranslationCategory(objects, arrows)
    observer = Observer(category, ComplexityAssignment({}, 'params'), 'points')
    geos = tuple(equivariant_lookup(x_space, y_space, perm, rng, name) for name in ('alpha', 'beta', 'gamma'))
    return PointInstance(seed, points, order, perm, observer, geos, EvaluationSet.whole(x_space))


def distance_matrix(inst: PointInstance, observer: Optional[Observer] = None) -> np.ndarray:
    obs = observer or inst.observer
    out = np.zeros((3, 3))
    for i, a in enumerate(inst.geos):
        for j, b in enumerate(inst.geos):
            out[i, j] = surrogate_distance(obs, a, b, inst.eval_set).value
    return out


def check_hemi_metric(inst: PointInstance) -> Tuple[List[str], float]:
    """Zero self-distance and the triangle inequality over all ordered triples."""
    h = distance_matrix(inst)
    failures = []
    for i in range(3):
        if h[i, i] != 0.0:
            failures.append(f"{inst.describe()}: h({inst.geos[i].name}, itself) = {h[i, i]!r}")
    worst = -np.inf
    for i, j, k in permutations(range(3)):
        excess = h[i, k] - h[i, j] - h[j, k]
        worst = max(worst, excess)
        if excess > TRIANGLE_TOLERANCE:
            names = [inst.geos[t].name for t in (i, j, k)]
            failures.append(f"{inst.describe()}: h({names[0]},{names[2]}) = {h[i, k]!r} > "
                            f"h({names[0]},{names[1]}) + h({names[1]},{names[2]}) = {h[i, j] + h[j, k]!r}")
    return failures, float(worst)


def nested_observer(inst: PointInstance, rng: np.random.Generator) -> Tuple[Observer, str]:
    """Sub-category keeping the powers of perm^d on X and either every or no backward arrow on Y."""
    divisors = [d for d in range(1, inst.order + 1) if inst.order % d == 0]
    d = divisors[rng.integers(len(divisors))]
    keep = [f'fx{j}' for j in range(d, inst.order, d)]
    backward = bool(rng.integers(2))
    if backward:
        keep += [a.id for a in inst.observer.translations.arrows if a.id.startswith('by') or a.id == 'const']
    sub = inst.observer.translations.sub_category(keep)
    return inst.observer.with_translations(sub), f"forward powers of perm^{d}, backward {'all' if backward else 'none'}"


def check_monotonicity(inst: PointInstance, rng: np.random.Generator) -> Tuple[List[str], float]:
    sub_obs, label = nested_observer(inst, rng)
    h_super = distance_matrix(inst)
    h_sub = distance_matrix(inst, sub_obs)
    margin = float((h_sub - h_super).min())
    failures = []
    if margin < -ORDER_TOLERANCE:
        i, j = np.unravel_index(np.argmin(h_sub - h_super), h_sub.shape)
        failures.append(f"{inst.describe()} ({label}): h_sub({inst.geos[i].name},{inst.geos[j].name}) = "
                        f"{h_sub[i, j]!r} < h_super = {h_super[i, j]!r}")
    return failures, margin


@dataclass
class LowerBoundInstance:
    seed: int
    points: Tuple[Tuple[int, int], ...]
    order: int
    perm: Tuple[int, ...]
    observer: Observer
    alpha: Geo
    beta: Geo
    space: PerceptionSpace

    def describe(self) -> str:
        return (f"seed {self.seed}: points {list(self.points)}, Z{self.order} acting by {list(self.perm)}, "
                f"alpha {list(self.alpha.table)}, beta {list(self.beta.table)}")


def build_lower_bound_instance(seed: int, inject_expansive: bool = False) -> LowerBoundInstance:
    """Orbit-constant labels against arbitrary labels, compared through identities only."""
    rng = np.random.default_rng(seed)
    points, order, perm = _draw_points(rng)
    x_space = point_space('X', points, perm, order)
    labels = class_label_space('labels', int(rng.integers(2, 5)))
    hom = GroupHom.annihilator(x_space.group, labels.group)
    orbit_label = {}
    alpha_table = []
    for x in range(len(perm)):
        orbit = min(int(y) for y in (power(perm, g)[x] for g in range(order)))
        if orbit not in orbit_label:
            orbit_label[orbit] = int(rng.integers(labels.carrier.size))
        alpha_table.append(orbit_label[orbit])
    alpha = lookup_geo(x_space, labels, alpha_table, hom, 'alpha')
    beta = lookup_geo(x_space, labels, rng.integers(labels.carrier.size, size=len(perm)), hom, 'beta')
    objects, arrows = [x_space, labels], []
    if inject_expansive:
        doubled, arrow = injected_arrow(x_space, points, perm, order)
        objects.append(doubled)
        arrows.append(arrow)
    observer = Observer(TranslationCategory(objects, arrows), ComplexityAssignment({}, 'params'), 'identities')
    return LowerBoundInstance(seed, points, order, perm, observer, alpha, beta, x_space)


def check_lower_bound(inst: LowerBoundInstance) -> Tuple[List[str], float]:
    h = surrogate_distance(inst.observer, inst.alpha, inst.beta, EvaluationSet.whole(inst.space)).value
    bound = equivariance_lower_bound(inst.beta, inst.space, inst.space.elements)
    gap = h - bound.per_point
    failures = []
    if gap < -ORDER_TOLERANCE:
        failures.append(f"{inst.describe()}: h = {h!r} < |NE|/(2|G||X|) = {bound.per_point!r} "
                        f"(|NE| = {bound.ne_count})")
    return failures, float(gap)


# -- diagrams over lookup tables ----------------------------------------------------------

SORT_ELEMENTS = {'A': ('a0', 'a1'), 'B': ('b0', 'b1')}


@dataclass
class FunctorInstance:
    seed: int
    header: str
    interpretation: Interpretation
    assignment: ComplexityAssignment
    chain: Tuple[DiagramAst, DiagramAst, DiagramAst]
    other: Tuple[DiagramAst, DiagramAst]

    def describe(self) -> str:
        steps = ' | '.join(format_diagram(d) for d in self.chain)
        return f"seed {self.seed}: {steps} (other: {' | '.join(format_diagram(d) for d in self.other)})"


def _word(rng: np.random.Generator, low: int, high: int) -> Tuple[str, ...]:
    return tuple(str(s) for s in rng.choice(['A', 'B'], size=int(rng.integers(low, high + 1))))


def _step(word: Tuple[str, ...], gens: Sequence[GeneratorDecl],
          rng: np.random.Generator) -> Tuple[DiagramAst, Tuple[str, ...]]:
    """One random typed step out of ``word``; every result word has one or two wires."""
    options: List[Tuple[DiagramAst, Tuple[str, ...]]] = [(par_all(Id(s) for s in word), word)]
    if len(word) == 1:
        options.append((Copy(word[0]), word * 2))
    else:
        a, b = word
        options += [(Swap(a, b), (b, a)), (Par(Id(a), Discard(b)), (a,)), (Par(Discard(a), Id(b)), (b,))]
        options += [(Par(Gen(g.name), Id(b)), g.coarity + (b,)) for g in gens
                    if g.arity == (a,) and len(g.coarity) == 1]
    options += [(Gen(g.name), g.coarity) for g in gens if g.arity == word]
    return options[rng.integers(len(options))]


def _chain(word, gens, rng, length):
    steps = []
    for _ in range(length):
        step, word = _step(word, gens, rng)
        steps.append(step)
    return tuple(steps)


def build_functor_instance(seed: int) -> FunctorInstance:
    rng = np.random.default_rng(seed)
    lines = ['sort A;', 'sort B;']
    for s in ('A', 'B'):
        lines.append(f'gen f{s}: {s} -> {format_word(_word(rng, 1, 2))} @ {int(rng.integers(10))};')
    lines.append(f'gen mix: {format_word(_word(rng, 2, 2))} -> {format_word(_word(rng, 1, 1))} '
                 f'@ {int(rng.integers(10))};')
    header = '\n'.join(lines) + '\n'
    sig = parse(header).signature
    sorts = {s: finite_space(s, elements) for s, elements in SORT_ELEMENTS.items()}
    interp = Interpretation(sorts, {})
    for gen in sig.generators.values():
        dom, cod = word_space(interp, gen.arity), word_space(interp, gen.coarity)
        table = rng.integers(cod.carrier.size, size=dom.carrier.size)
        interp.generators[gen.name] = lookup_geo(dom, cod, table, name=gen.name)
    gens = list(sig.generators.values())
    chain = _chain(_word(rng, 1, 2), gens, rng, 3)
    other = _chain(_word(rng, 1, 2), gens, rng, 2)
    return FunctorInstance(seed, header, interp, ComplexityAssignment.from_signature(sig, name='params'), chain, other)


def check_functor_laws(inst: FunctorInstance) -> List[str]:
    """Associativity, additivity, interchange and print/parse stability for one instance."""
    d1, d2, d3 = inst.chain
    e1, e2 = inst.other
    sig = parse(inst.header).signature
    failures = []

    left, right = Seq(Seq(d1, d2), d3), Seq(d1, Seq(d2, d3))
    typed_left, typed_right = typecheck(left, sig, 'left'), typecheck(right, sig, 'right')
    if not extensionally_equal(evaluate_semantics(typed_left, inst.interpretation),
                               evaluate_semantics(typed_right, inst.interpretation)):
        failures.append(f"{inst.describe()}: (d1;d2);d3 and d1;(d2;d3) differ")

    c = inst.assignment
    parts = complexity(d1, c) + complexity(d2, c) + complexity(d3, c)
    if not complexity(left, c) == complexity(right, c) == parts:
        failures.append(f"{inst.describe()}: complexities {complexity(left, c)}, {complexity(right, c)}, "
                        f"sum of steps {parts}")
    if complexity(Par(d1, e1), c) != complexity(d1, c) + complexity(e1, c):
        failures.append(f"{inst.describe()}: complexity is not additive under *")

    interleaved = typecheck(Seq(Par(d1, e1), Par(d2, e2)), sig, 'interleaved')
    blocked = typecheck(Par(Seq(d1, d2), Seq(e1, e2)), sig, 'blocked')
    if not extensionally_equal(evaluate_semantics(interleaved, inst.interpretation),
                               evaluate_semantics(blocked, inst.interpretation)):
        failures.append(f"{inst.describe()}: (d1*e1);(d2*e2) and (d1;d2)*(e1;e2) differ")

    text = format_diagram(left)
    program = parse(inst.header + f'diagram d = {text};\n')
    reparsed = program.typed('d')
    if reparsed.ast != left or (reparsed.input, reparsed.output) != (typed_left.input, typed_left.output):
        failures.append(f"{inst.describe()}: reparsing {text!r} changed the diagram")
    return failures


# -- gradients -------------------------------------------------------------------------------

GRADIENT_KINDS = ('geo1', 'geo2', 'mlp', 'cnn')


def gradient_model(kind: str, rng: np.random.Generator) -> SurrogateModel:
    """Small instance of each trainable architecture."""
    if kind in ('geo1', 'geo2'):
        bank = bank_from_arrays(rng.uniform(size=(3, 3, 3)))
        model = Geo1Model(bank, (6, 6)) if kind == 'geo1' else Geo2Model(bank, (6, 6))
    elif kind == 'mlp':
        model = MlpModel((6, 6), (4,))
    else:
        model = CnnModel((10, 10), (2, 3), 4)
    model.init_params(int(rng.integers(2 ** 31 - 1)))
    return model


def _kinks(model: SurrogateModel, cache) -> List[np.ndarray]:
    """ReLU masks and pooling winners; finite differences are meaningless where they move."""
    if model.kind != 'cnn':
        return []
    _, z1, arg1, _, z2, arg2, _, _, z3, _ = cache
    return [z1 > 0, arg1, z2 > 0, arg2, z3 > 0]


def check_gradient_draw(kind: str, seed: int) -> Tuple[List[str], float, int]:
    """Compare every parameter tensor's gradient at one random entry with a central difference."""
    rng = np.random.default_rng(seed)
    model = gradient_model(kind, rng)
    images = rng.uniform(size=(4,) + model.shape)
    labels = rng.integers(model.classes, size=4)
    inputs = model.prepare(images)
    loss = 'ce' if model.head == 'softmax' else 'bce'

    logits, cache = model.forward(inputs)
    base_kinks = _kinks(model, cache)
    grads = model.backward(cache, loss_and_grad(loss, logits, labels)[1])

    def loss_at(name, idx, value):
        saved = model.params[name][idx]
        model.params[name][idx] = value
        out, moved = model.forward(inputs)
        model.params[name][idx] = saved
        return loss_and_grad(loss, out, labels)[0], _kinks(model, moved)

    failures, worst, skipped = [], 0.0, 0
    for name, value in model.params.items():
        idx = tuple(int(rng.integers(n)) for n in value.shape)
        plus, kinks_plus = loss_at(name, idx, value[idx] + GRADIENT_STEP)
        minus, kinks_minus = loss_at(name, idx, value[idx] - GRADIENT_STEP)
        if not all(np.array_equal(a, b) and np.array_equal(a, c)
                   for a, b, c in zip(base_kinks, kinks_plus, kinks_minus)):
            skipped += 1
            continue
        numeric = (plus - minus) / (2 * GRADIENT_STEP)
        analytic = float(grads[name][idx])
        err = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6)
        worst = max(worst, err)
        if err > GRADIENT_TOLERANCE:
            failures.append(f"{kind} seed {seed}: d/d{name}{list(idx)} analytic {analytic:.9e}, "
                            f"numeric {numeric:.9e}, relative error {err:.3e}")
    return failures, worst, skipped


# -- torus invariance ---------------------------------------------------------------------------

SYNTHETIC_SIDE = 16
INVARIANCE_PATTERNS = 16


def invariance_images(count: int, seed: int) -> Tuple[np.ndarray, str]:
    """MNIST test images when GENEO_LAB_DATA holds them, else sparse random 16×16 images."""
    if LabConfig.DATA_DIR:
        try:
            return load_mnist_split(LabConfig.DATA_DIR, 'test').images[:count], 'mnist'
        except (GeneoLabError, OSError) as e:
            logger.info(f"MNIST test images unavailable ({e}); using synthetic images")
    rng = np.random.default_rng(seed)
    side = SYNTHETIC_SIDE
    images = rng.uniform(size=(count, side, side)) * (rng.uniform(size=(count, side, side)) < 0.3)
    return images, 'synthetic'


def check_invariance(model: Geo1Model, images: np.ndarray) -> Tuple[List[str], float, int]:
    """Every torus shift of every image: same argmax, scores within SCORE_TOLERANCE."""
    torus = image_space('torus', *model.shape)
    failures, worst, ne = [], 0.0, 0
    for n, image in enumerate(images):
        moved = np.stack([torus.act(g, image) for g in torus.group.elements])
        scores = model.scores(moved)
        gap = float(np.abs(scores - scores[0]).max())
        flips = int((scores.argmax(axis=1) != scores[0].argmax()).sum())
        worst = max(worst, gap)
        ne += flips
        if flips or gap > SCORE_TOLERANCE:
            failures.append(f"image {n}: {flips} shifts change the class, largest score gap {gap:.3e}")
    return failures, worst, ne


# -- suites -------------------------------------------------------------------------------------

def _each(result: SuiteResult, seeds: Sequence[int], check: Callable[[int], List[str]]) -> None:
    for s in seeds:
        try:
            result.failures.extend(check(s))
        except GeneoLabError as e:
            result.failures.append(f"seed {s}: {type(e).__name__}: {e}")


def suite_hemi_metric(instances: int, seed: int, inject_expansive: bool = False) -> SuiteResult:
    result = SuiteResult('hemi-metric', instances)
    worst = [-np.inf]

    def check(s):
        failures, excess = check_hemi_metric(build_point_instance(s, inject_expansive))
        worst[0] = max(worst[0], excess)
        return failures

    _each(result, instance_seeds(seed, instances), check)
    result.stats['max_triangle_excess'] = float(worst[0])
    return result


def suite_monotonicity(instances: int, seed: int, inject_expansive: bool = False) -> SuiteResult:
    result = SuiteResult('monotonicity', instances)
    margins = []

    def check(s):
        failures, margin = check_monotonicity(build_point_instance(s, inject_expansive),
                                              np.random.default_rng(s + 1))
        margins.append(margin)
        return failures

    _each(result, instance_seeds(seed, instances), check)
    result.stats['min_sub_minus_super'] = float(min(margins)) if margins else 0.0
    return result


def suite_lower_bound(instances: int, seed: int, inject_expansive: bool = False) -> SuiteResult:
    result = SuiteResult('lower-bound', instances)
    gaps = []

    def check(s):
        failures, gap = check_lower_bound(build_lower_bound_instance(s, inject_expansive))
        gaps.append(gap)
        return failures

    _each(result, instance_seeds(seed, instances), check)
    if gaps:
        result.stats['max_gap'] = float(max(gaps))
        result.stats['min_gap'] = float(min(gaps))
    return result


def suite_functor_law(instances: int, seed: int, inject_expansive: bool = False) -> SuiteResult:
    result = SuiteResult('functor-law', instances)
    _each(result, instance_seeds(seed, instances), lambda s: check_functor_laws(build_functor_instance(s)))
    return result


def suite_gradient_check(instances: int, seed: int, inject_expansive: bool = False) -> SuiteResult:
    result = SuiteResult('gradient-check', instances)
    worst, skipped = [0.0], [0]

    def check(s):
        failures = []
        for kind in GRADIENT_KINDS:
            f, err, skip = check_gradient_draw(kind, s)
            failures += f
            worst[0] = max(worst[0], err)
            skipped[0] += skip
        return failures

    _each(result, instance_seeds(seed, instances), check)
    result.stats['max_relative_error'] = worst[0]
    result.stats['skipped_at_kinks'] = skipped[0]
    return result


def suite_invariance(instances: int, seed: int, inject_expansive: bool = False) -> SuiteResult:
    result = SuiteResult('invariance', instances)
    images, source = invariance_images(instances, seed)
    side = 9 if images.shape[1] >= 28 else 5
    bank = sample_patterns(images, INVARIANCE_PATTERNS, side, side, seed)
    model = Geo1Model(bank, images.shape[1:])
    model.init_params(seed)
    failures, worst, ne = check_invariance(model, images)
    result.failures += failures
    result.stats.update({'max_score_gap': worst, 'ne_count': ne, 'images': len(images)})
    logger.info(f"Invariance checked on {len(images)} {source} images")
    return result


def suite_category_validation(instances: int, seed: int, inject_expansive: bool = False) -> SuiteResult:
    """Categories holding an expansive arrow must be rejected, naming that arrow."""
    result = SuiteResult('category-validation', instances)
    for s in instance_seeds(seed, instances):
        try:
            build_point_instance(s, inject_expansive=True)
        except CategoryValidationError as e:
            if INJECTED_ARROW not in str(e):
                result.failures.append(f"seed {s}: rejected for another reason: {e}")
            continue
        result.failures.append(f"seed {s}: category with arrow {INJECTED_ARROW} was accepted")
    return result


SUITES: Dict[str, Tuple[Callable[..., SuiteResult], int]] = {
    'hemi-metric': (suite_hemi_metric, 200),
    'monotonicity': (suite_monotonicity, 100),
    'lower-bound': (suite_lower_bound, 100),
    'functor-law': (suite_functor_law, 100),
    'gradient-check': (suite_gradient_check, 20),
    'invariance': (suite_invariance, 50),
    'category-validation': (suite_category_validation, 20),
}


def run_suite(name: str, instances: Optional[int] = None, seed: int = 0,
              inject_expansive: bool = False) -> SuiteResult:
    """Run one registered suite; ``inject_expansive`` adds a rejected arrow to every category it builds."""
    if name not in SUITES:
        logger.error(f"Unknown suite {name}")
        raise UnknownSuiteError(f"Unknown suite {name}; expected one of {', '.join(SUITES)}")
    suite, default = SUITES[name]
    started = time.perf_counter()
    result = suite(instances if instances is not None else default, seed, inject_expansive)
    result.seconds = time.perf_counter() - started
    if result.failures:
        logger.error(f"Suite {name}: {len(result.failures)} failures")
    else:
        logger.info(f"Suite {name}: {result.instances} instances passed in {result.seconds:.1f}s")
    return result
