"""Crossed pairs, functional cost, surrogate distance and the quantities derived from it."""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from joblib import Parallel, delayed

from ..config import LabConfig
from ..diagram_toolkit import DiagramAst, TypedDiagram, complexity, evaluate_semantics
from ..errors import GeneoLabError, SpaceMismatchError
from ..geo_toolkit import Geo, GeoLike, as_geo, identity
from ..perception_toolkit import (
    ArgmaxDiscreteMetric, DiscreteMetric, FiniteGroup, PerceptionSpace, PseudoMetric, metric_value,
)
from .ob_category import Arrow, Observer

logger = logging.getLogger(__name__)

INF = math.inf


@dataclass(frozen=True)
class CrossedPair:
    """Forward arrow on inputs (dom α -> dom β), backward arrow on outputs (cod β -> cod α)."""

    id: int
    forward: Arrow
    backward: Arrow

    @property
    def label(self) -> str:
        return f'{self.forward.id}|{self.backward.id}'


@dataclass(frozen=True)
class EvaluationSet:
    """Finite dataset over dom α and the output metric used on cod α (None: the cod metric)."""

    data: Sequence[Any]
    metric: Optional[PseudoMetric] = None

    def __post_init__(self):
        if len(self.data) == 0:
            raise GeneoLabError("An evaluation set must be nonempty")

    @classmethod
    def whole(cls, space: PerceptionSpace, metric: Optional[PseudoMetric] = None) -> 'EvaluationSet':
        return cls(space.elements, metric)

    def __len__(self):
        return len(self.data)


@dataclass(frozen=True)
class DistanceResult:
    value: float
    pair: Optional[CrossedPair]
    costs: Tuple[Tuple[CrossedPair, float], ...] = field(default=())


def enumerate_crossed_pairs(obs: Observer, alpha: GeoLike, beta: GeoLike) -> List[CrossedPair]:
    """All (l, m) with l: dom α -> dom β and m: cod β -> cod α, forward-major in declaration order."""
    alpha, beta = as_geo(alpha), as_geo(beta)
    forwards = obs.translations.between(alpha.dom, beta.dom)
    backwards = obs.translations.between(beta.cod, alpha.cod)
    pairs = []
    for l in forwards:
        for m in backwards:
            pairs.append(CrossedPair(len(pairs), l, m))
    return pairs


def _chunks(n: int, threads: int) -> List[range]:
    size = max(1, math.ceil(n / max(1, threads)))
    return [range(i, min(n, i + size)) for i in range(0, n, size)]


def _gaps(metric: PseudoMetric, space: PerceptionSpace, left: Sequence[Any], right: Sequence[Any],
          threads: int) -> List[float]:
    """d(left[i], right[i]) for all i, in index order."""
    carrier = space.carrier

    def work(rng):
        return [metric.between(carrier, left[i], right[i]) for i in rng]

    if threads <= 1 or len(left) < 2:
        return work(range(len(left)))
    parts = Parallel(n_jobs=threads, backend='threading')(delayed(work)(r) for r in _chunks(len(left), threads))
    return [g for part in parts for g in part]


def _average(gaps: List[float]) -> float:
    total = 0.0
    for g in gaps:
        total += g
    return metric_value(total / len(gaps))


def cost(pair: CrossedPair, alpha: GeoLike, beta: GeoLike, eval_set: EvaluationSet,
         threads: int = 1) -> float:
    """Uniform average over the evaluation set of d((m ∘ f_β ∘ l)(x), f_α(x))."""
    alpha, beta = as_geo(alpha), as_geo(beta)
    if pair.forward.dom != alpha.dom or pair.forward.cod != beta.dom \
            or pair.backward.dom != beta.cod or pair.backward.cod != alpha.cod:
        raise SpaceMismatchError(f"Pair {pair.label} does not connect {alpha.name} and {beta.name}")
    xs = list(eval_set.data)
    through_beta = pair.backward.map_batch(beta.map_batch(pair.forward.map_batch(xs)))
    metric = eval_set.metric or alpha.cod.metric
    return _average(_gaps(metric, alpha.cod, through_beta, alpha.map_batch(xs), threads))


def surrogate_distance(obs: Observer, alpha: GeoLike, beta: GeoLike, eval_set: EvaluationSet,
                       threads: int = 1) -> DistanceResult:
    """h_O(α, β): minimum cost over crossed pairs, +inf when there is none.

    Ties go to the lowest pair id.
    """
    alpha, beta = as_geo(alpha), as_geo(beta)
    pairs = enumerate_crossed_pairs(obs, alpha, beta)
    if not pairs:
        return DistanceResult(INF, None, ())
    xs = list(eval_set.data)
    alpha_out = alpha.map_batch(xs)
    metric = eval_set.metric or alpha.cod.metric
    beta_out: Dict[str, List[Any]] = {}
    best_value, best_pair = INF, None
    costs = []
    for pair in pairs:
        if pair.forward.id not in beta_out:
            beta_out[pair.forward.id] = beta.map_batch(pair.forward.map_batch(xs))
        through_beta = pair.backward.map_batch(beta_out[pair.forward.id])
        value = _average(_gaps(metric, alpha.cod, through_beta, alpha_out, threads))
        costs.append((pair, value))
        if best_pair is None or value < best_value:
            best_value, best_pair = value, pair
    return DistanceResult(best_value, best_pair, tuple(costs))


def symmetric_distance(obs: Observer, alpha: GeoLike, beta: GeoLike, eval_alpha: EvaluationSet,
                       eval_beta: EvaluationSet, threads: int = 1) -> float:
    """max(h_O(α, β), h_O(β, α))."""
    forward = surrogate_distance(obs, alpha, beta, eval_alpha, threads).value
    backward = surrogate_distance(obs, beta, alpha, eval_beta, threads).value
    return max(forward, backward)


def classifier_metric(space: PerceptionSpace) -> PseudoMetric:
    """Argmax classes for score vectors, plain equality otherwise."""
    return DiscreteMetric() if space.is_finite else ArgmaxDiscreteMetric()


def fidelity(alpha: GeoLike, beta: GeoLike, dataset: Sequence[Any], threads: int = 1) -> float:
    """Agreement rate: 1 - cost of the identity pair under the discrete metric."""
    alpha, beta = as_geo(alpha), as_geo(beta)
    if alpha.dom != beta.dom or alpha.cod != beta.cod:
        raise SpaceMismatchError(f"Fidelity needs equal spaces: {alpha.dom.id} -> {alpha.cod.id} vs "
                                 f"{beta.dom.id} -> {beta.cod.id}")
    pair = CrossedPair(0, Arrow(f'id[{alpha.dom.id}]', identity(alpha.dom), 'identity'),
                       Arrow(f'id[{alpha.cod.id}]', identity(alpha.cod), 'identity'))
    return 1.0 - cost(pair, alpha, beta, EvaluationSet(dataset, classifier_metric(alpha.cod)), threads)


@dataclass(frozen=True)
class LowerBound:
    """|NE| / (2|G|); ``per_point`` divides by |X| as well, which is the scale of an averaged h_O."""

    ne_count: int
    group_order: int
    dataset_size: int

    @property
    def bound(self) -> float:
        return self.ne_count / (2 * self.group_order)

    @property
    def per_point(self) -> float:
        return self.bound / self.dataset_size


def equivariance_lower_bound(beta: GeoLike, space: PerceptionSpace, dataset: Sequence[Any]) -> LowerBound:
    """Count NE = {(g, x): f_β(x) != f_β(g*x)} over the group of ``space`` by brute force."""
    beta = as_geo(beta)
    if len(dataset) == 0:
        raise GeneoLabError("The lower bound needs a nonempty dataset")
    metric = classifier_metric(beta.cod)
    group: FiniteGroup = space.group
    xs = list(dataset)
    base = beta.map_batch(xs)
    ne = 0
    for g in group.elements:
        moved = beta.map_batch([space.act(g, x) for x in xs])
        ne += sum(1 for a, b in zip(base, moved) if metric.between(beta.cod.carrier, a, b) > 0.0)
    return LowerBound(ne, group.order, len(xs))


@dataclass(frozen=True)
class Verdict:
    explained: bool
    distance: float
    complexity_alpha: float
    complexity_beta: float
    pair: Optional[CrossedPair] = None


def explained_at_level(alpha_diagram: Union[TypedDiagram, DiagramAst], beta_diagram: Union[TypedDiagram, DiagramAst],
                       obs: Observer, eval_set: EvaluationSet, epsilon: float, threads: int = 1) -> Verdict:
    """β explains α at level ε iff h_O(α, β) <= ε and C(β) <= C(α)."""
    if obs.interpretation is None:
        raise GeneoLabError(f"Observer {obs.name} has no interpretation for diagrams")
    alpha = evaluate_semantics(alpha_diagram, obs.interpretation)
    beta = evaluate_semantics(beta_diagram, obs.interpretation)
    result = surrogate_distance(obs, alpha, beta, eval_set, threads)
    c_alpha = complexity(alpha_diagram, obs.complexity)
    c_beta = complexity(beta_diagram, obs.complexity)
    explained = result.value <= epsilon + LabConfig.METRIC_TOLERANCE and c_beta <= c_alpha
    return Verdict(explained, result.value, c_alpha, c_beta, result.pair)


def space_distance(obs: Observer, a: PerceptionSpace, b: PerceptionSpace, eval_a: EvaluationSet,
                   eval_b: EvaluationSet, threads: int = 1) -> float:
    """Symmetric surrogate distance between the identities of ``a`` and ``b``.

    A direction costs the mean round-trip displacement d(x, m(l(x))).
    """
    return symmetric_distance(obs, identity(a), identity(b), eval_a, eval_b, threads)
