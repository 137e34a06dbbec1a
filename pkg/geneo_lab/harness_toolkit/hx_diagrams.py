"""Model pipelines as string diagrams, their two complexity observers, and the translation
categories used to compare models with a black-box."""
import logging
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..diagram_toolkit import (
    ComplexityAssignment, Copy, DiagramAst, Gen, Id, Program, TypedDiagram, complexity, format_diagram,
    format_word, par_all, parse, seq_all,
)
from ..errors import ConfigError, GeneoLabError
from ..geo_toolkit import (
    Geneo, Geo, GroupHom, check_nonexpansive, compose, declare_geneo, identity,
)
from ..observer_toolkit import Arrow, Observer, TranslationCategory
from ..perception_toolkit import PerceptionSpace, image_space, sample_probes, score_space
from ..surrogate_toolkit import CnnModel, downscale_2x2_max, downscale_geo, upscale_geo
from .hx_config import ModelSpec

logger = logging.getLogger(__name__)

OBSERVERS = ('params', 'nonlinearities')
# arrow probes for the sampled non-expansiveness check of intensional arrows
ARROW_PROBES = 32


@dataclass(frozen=True)
class GeneratorCost:
    name: str
    arity: Tuple[str, ...]
    coarity: Tuple[str, ...]
    params: int
    nonlinearities: int


@dataclass(frozen=True)
class ModelDiagram:
    """A model pipeline: DSL source, its typed diagram and both complexity assignments."""

    source: str
    diagram: TypedDiagram
    assignments: Dict[str, ComplexityAssignment]

    def complexity(self, observer: str) -> float:
        if observer not in self.assignments:
            raise ConfigError(f"Unknown observer {observer}; expected one of {OBSERVERS}")
        return complexity(self.diagram, self.assignments[observer])


def fanout(sort: str, count: int) -> DiagramAst:
    """Balanced tree of ``count - 1`` copies from one wire to ``count`` wires."""
    if count < 1:
        raise GeneoLabError(f"Cannot fan out to {count} wires")
    if count == 1:
        return Id(sort)
    left = (count + 1) // 2
    return seq_all([Copy(sort), par_all([fanout(sort, left), fanout(sort, count - left)])])


def _geo1(spec: ModelSpec, shape, classes) -> Tuple[List[str], List[GeneratorCost], DiagramAst]:
    p = spec.patterns
    gens = [GeneratorCost(f'p{i}', ('X',), ('R',), 0, 1) for i in range(p)]
    gens.append(GeneratorCost('head', ('R',) * p, ('Y',), classes * p + classes, classes))
    ast = seq_all([fanout('X', p), par_all(Gen(g.name) for g in gens[:-1]), Gen('head')])
    return ['X', 'R', 'Y'], gens, ast


def _geo2(spec: ModelSpec, shape, classes):
    p, pixels = spec.patterns, shape[0] * shape[1]
    gens = [GeneratorCost(f'cwm{i}', ('X',), ('M',), 0, 1) for i in range(p)]
    gens.append(GeneratorCost('mix', ('M',) * p, ('S',), p + 1, p + 1))
    gens.append(GeneratorCost('head', ('S',), ('Y',), classes * pixels + classes, classes))
    ast = seq_all([fanout('X', p), par_all(Gen(g.name) for g in gens[:p]), Gen('mix'), Gen('head')])
    return ['X', 'M', 'S', 'Y'], gens, ast


def _mlp(spec: ModelSpec, shape, classes):
    sizes = [shape[0] * shape[1], *spec.hidden, classes]
    sorts = ['X'] + [f'H{k}' for k in range(1, len(sizes) - 1)] + ['Y']
    gens = [GeneratorCost(f'dense{k}', (sorts[k],), (sorts[k + 1],), a * b + b, b)
            for k, (a, b) in enumerate(zip(sizes, sizes[1:]))]
    return sorts, gens, seq_all(Gen(g.name) for g in gens)


def _cnn(spec: ModelSpec, shape, classes):
    model = CnnModel(shape, spec.channels, spec.dense, classes)
    (h1, w1), _, (h2, w2), _ = model.stage_shapes()
    c1, c2 = model.channels
    k2 = model.kernel ** 2
    gens = [
        GeneratorCost('conv1', ('X',), ('C1',), c1 * k2 + c1, c1 * h1 * w1),
        GeneratorCost('pool1', ('C1',), ('Q1',), 0, 0),
        GeneratorCost('conv2', ('Q1',), ('C2',), c2 * c1 * k2 + c2, c2 * h2 * w2),
        GeneratorCost('pool2', ('C2',), ('Q2',), 0, 0),
        GeneratorCost('dense', ('Q2',), ('D',), model.flat * model.dense + model.dense, model.dense),
        GeneratorCost('out', ('D',), ('Y',), model.dense * classes + classes, classes),
    ]
    return ['X', 'C1', 'Q1', 'C2', 'Q2', 'D', 'Y'], gens, seq_all(Gen(g.name) for g in gens)


_BUILDERS: Dict[str, Callable] = {'geo1': _geo1, 'geo2': _geo2, 'mlp': _mlp, 'cnn': _cnn}


def diagram_name(model_id: str) -> str:
    name = re.sub(r'\W', '_', model_id)
    return name if not name[0].isdigit() else f'm_{name}'


def model_source(spec: ModelSpec, shape: Tuple[int, int], classes: int = 10) -> str:
    """DSL text of the pipeline, generator costs in ``params`` as ``@`` annotations."""
    sorts, gens, ast = _BUILDERS[spec.kind](spec, shape, classes)
    lines = [f'# {spec.id}: {spec.kind} on {shape[0]}x{shape[1]} images']
    lines += [f'sort {s};' for s in sorts]
    lines += [f'gen {g.name}: {format_word(g.arity)} -> {format_word(g.coarity)} @ {g.params};' for g in gens]
    lines.append(f'diagram {diagram_name(spec.id)} = {format_diagram(ast)};')
    return '\n'.join(lines) + '\n'


def model_diagram(spec: ModelSpec, shape: Tuple[int, int], classes: int = 10) -> ModelDiagram:
    """Parse the generated source back and attach both observers' assignments."""
    _, gens, _ = _BUILDERS[spec.kind](spec, shape, classes)
    source = model_source(spec, shape, classes)
    program: Program = parse(source)
    diagram = program.typed(diagram_name(spec.id))
    assignments = {
        'params': ComplexityAssignment.from_signature(program.signature, name='params'),
        'nonlinearities': ComplexityAssignment({g.name: g.nonlinearities for g in gens}, 'nonlinearities'),
    }
    return ModelDiagram(source, diagram, assignments)


# -- translation categories ------------------------------------------------------------

def _lift(dom: PerceptionSpace, cod: PerceptionSpace, name: str,
          batch: Optional[Callable[[np.ndarray], np.ndarray]] = None, seed: int = 0) -> Geneo:
    """Image map out of a trivial-group space, validated on sampled pairs."""
    if dom.group.order != 1:
        raise GeneoLabError(f"Arrow {name} must start at a space with the trivial group")
    if batch is None:
        geo = Geo(dom, cod, lambda x: x, GroupHom.annihilator(dom.group, cod.group), name, 'builtin',
                  batch_fn=lambda xs: list(xs))
    else:
        geo = Geo(dom, cod, batch, GroupHom.annihilator(dom.group, cod.group), name, 'builtin',
                  batch_fn=lambda xs: list(batch(np.stack(xs))))
    probes = sample_probes(dom, ARROW_PROBES, seed)
    result = check_nonexpansive(geo, list(zip(probes[0::2], probes[1::2])), group_probes=probes[:2])
    if not isinstance(result, Geneo):
        logger.error(f"Arrow {name} is expansive on sampled pairs: ratio {result.worst_ratio}")
        raise GeneoLabError(f"Arrow {name} is expansive on sampled pairs")
    return result


@dataclass
class ModelSpaces:
    """Observer plus the spaces models and the black-box live on.

    ``images`` carries the trivial group (black-box inputs); each model reads
    ``model_space(kind)``.
    """

    observer: Observer
    images: PerceptionSpace
    scores: PerceptionSpace
    plain: PerceptionSpace
    torus: PerceptionSpace

    def model_space(self, kind: str) -> PerceptionSpace:
        # only GEO1 is invariant under torus translations
        return self.torus if kind == 'geo1' else self.plain

    def forward_arrow(self, kind: str) -> Arrow:
        """First declared arrow from black-box images to the model's input space."""
        arrows = self.observer.translations.between(self.images, self.model_space(kind))
        if not arrows:
            raise GeneoLabError(f"Observer {self.observer.name} has no arrow "
                                f"{self.images.id} -> {self.model_space(kind).id}")
        return arrows[0]

    def backward_arrow(self) -> Arrow:
        return self.observer.translations.between(self.scores, self.scores)[0]


def _identity_arrows(spaces: Sequence[PerceptionSpace]) -> List[Arrow]:
    return [Arrow(f'id[{s.id}]', identity(s), 'identity') for s in spaces]


def classification_observer(shape: Tuple[int, int], classes: int = 10,
                            assignment: Optional[ComplexityAssignment] = None) -> ModelSpaces:
    """Same-size comparison: identities plus the embedding of plain images into torus images."""
    h, w = shape
    images = image_space(f'images{h}x{w}', h, w, translations=False)
    torus = image_space(f'images{h}x{w}_torus', h, w)
    scores = score_space('scores', classes)
    arrows = _identity_arrows([images, torus, scores])
    arrows.append(Arrow('embed', _lift(images, torus, 'embed'), 'builtin'))
    category = TranslationCategory([images, torus, scores], arrows, closure=[])
    obs = Observer(category, assignment or ComplexityAssignment({}, 'params'), 'classification')
    return ModelSpaces(obs, images, scores, images, torus)


# (first, then, equals) over arrow ids; units are added by the category
RESCALE_CLOSURE = [
    ('embed', 'down', 'reduce'),
    ('embed', 'updown', 'reduce_up'),
    ('down', 'up', 'updown'),
    ('up', 'down', 'id[half_torus]'),
    ('up', 'updown', 'up'),
    ('updown', 'down', 'down'),
    ('updown', 'updown', 'updown'),
    ('down_plain', 'embed_half', 'reduce'),
    ('down_plain', 'half_up', 'reduce_up'),
    ('embed_half', 'up', 'half_up'),
    ('reduce', 'up', 'reduce_up'),
    ('reduce_up', 'down', 'reduce'),
    ('reduce_up', 'updown', 'reduce_up'),
    ('half_up', 'down', 'embed_half'),
    ('half_up', 'updown', 'half_up'),
]


def rescale_observer(shape: Tuple[int, int], classes: int = 10,
                     assignment: Optional[ComplexityAssignment] = None) -> ModelSpaces:
    """Full-size black-box images against half-size model inputs through 2×2 max downscaling.

    The stride-2 torus space is where downscaling commutes with translations;
    nearest-neighbour upscaling is its declared right inverse.
    """
    h, w = shape
    if h % 2 or w % 2:
        raise ConfigError(f"2x2 rescaling needs even image dims, got {h}x{w}")
    images = image_space('images', h, w, translations=False)
    strided = image_space('images_s2', h, w, stride=2)
    half = image_space('half_torus', h // 2, w // 2)
    half_plain = image_space('half', h // 2, w // 2, translations=False)
    scores = score_space('scores', classes)
    # ids of the identities must match RESCALE_CLOSURE
    spaces = [images, strided, half, half_plain, scores]
    arrows = _identity_arrows(spaces)

    embed = _lift(images, strided, 'embed')
    down = downscale_geo(strided, half)
    up = upscale_geo(half, strided)
    down_plain = _lift(images, half_plain, 'down_plain', downscale_2x2_max)
    embed_half = _lift(half_plain, half, 'embed_half')
    reason = 'composite of non-expansive arrows'
    reduce = declare_geneo(compose(down, embed), reason)
    updown = declare_geneo(compose(up, down), reason)
    reduce_up = declare_geneo(compose(up, reduce), reason)
    half_up = declare_geneo(compose(up, embed_half), reason)
    for arrow_id, geneo in [('embed', embed), ('down', down), ('up', up), ('down_plain', down_plain),
                            ('embed_half', embed_half), ('reduce', reduce), ('updown', updown),
                            ('reduce_up', reduce_up), ('half_up', half_up)]:
        arrows.append(Arrow(arrow_id, geneo, 'builtin'))

    index = {a.id: i for i, a in enumerate(arrows)}
    closure = [(index[a], index[b], index[c]) for a, b, c in RESCALE_CLOSURE]
    category = TranslationCategory(spaces, arrows, closure)
    obs = Observer(category, assignment or ComplexityAssignment({}, 'params'), 'rescale')
    return ModelSpaces(obs, images, scores, half_plain, half)
