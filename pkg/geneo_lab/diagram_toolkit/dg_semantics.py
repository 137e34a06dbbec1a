"""The semantics functor: typed diagrams to Geos."""
import logging
from functools import reduce
from typing import Dict, Mapping, Union

from ..errors import MissingBindingError, SpaceMismatchError
from ..geo_toolkit import Geo, GeoLike, Geneo, as_geo, compose, copy, discard, identity, swap, tensor
from ..perception_toolkit import PerceptionSpace, product_space, unit_space
from .dg_syntax import Copy, DiagramAst, Discard, Empty, Gen, Id, Signature, Swap, TypedDiagram, Word, fold

logger = logging.getLogger(__name__)


class Interpretation:
    """Sorts to perception spaces, generators to Geos."""

    def __init__(self, sorts: Mapping[str, PerceptionSpace], generators: Mapping[str, GeoLike]):
        self.sorts: Dict[str, PerceptionSpace] = dict(sorts)
        self.generators: Dict[str, GeoLike] = dict(generators)
        self.logger = logging.getLogger(self.__class__.__name__)

    def space(self, sort: str) -> PerceptionSpace:
        try:
            return self.sorts[sort]
        except KeyError:
            self.logger.error(f"No space bound to sort {sort}")
            raise MissingBindingError(f"No space bound to sort {sort}") from None

    def generator(self, name: str) -> GeoLike:
        try:
            return self.generators[name]
        except KeyError:
            self.logger.error(f"No Geo bound to generator {name}")
            raise MissingBindingError(f"No Geo bound to generator {name}") from None

    def check_against(self, sig: Signature) -> None:
        """dom/cod of every bound generator must be the tensored arity/coarity."""
        for gen in sig.generators.values():
            if gen.name not in self.generators:
                continue
            geo = as_geo(self.generators[gen.name])
            dom, cod = word_space(self, gen.arity), word_space(self, gen.coarity)
            if geo.dom != dom or geo.cod != cod:
                raise SpaceMismatchError(f"Generator {gen.name} is bound to {geo.dom.id} -> {geo.cod.id}, "
                                         f"expected {dom.id} -> {cod.id}")


def word_space(interp: Interpretation, word: Word) -> PerceptionSpace:
    """Tensored interpretation of a word; the empty word is the unit space."""
    return reduce(product_space, (interp.space(s) for s in word), unit_space())


def evaluate_semantics(d: Union[TypedDiagram, DiagramAst], interp: Interpretation) -> Geo:
    """Gen to its binding, structural nodes to structural maps, Seq to compose, Par to tensor."""
    ast = d.ast if isinstance(d, TypedDiagram) else d
    structural: Dict[tuple, Geneo] = {}

    def cached(key, build):
        if key not in structural:
            structural[key] = build()
        return structural[key]

    def leaf(node) -> Geo:
        if isinstance(node, Gen):
            return as_geo(interp.generator(node.name))
        if isinstance(node, Empty):
            return as_geo(cached(('empty',), lambda: identity(unit_space())))
        if isinstance(node, Id):
            return as_geo(cached(('id', node.sort), lambda: identity(interp.space(node.sort))))
        if isinstance(node, Swap):
            return as_geo(cached(('swap', node.left, node.right),
                                 lambda: swap(interp.space(node.left), interp.space(node.right))))
        if isinstance(node, Copy):
            return as_geo(cached(('copy', node.sort), lambda: copy(interp.space(node.sort))))
        if isinstance(node, Discard):
            return as_geo(cached(('discard', node.sort), lambda: discard(interp.space(node.sort))))
        raise MissingBindingError(f"Cannot interpret node {node!r}")

    geo = fold(ast, leaf, lambda node, first, second: compose(second, first),
               lambda node, top, bottom: tensor(top, bottom))
    if isinstance(d, TypedDiagram):
        dom, cod = word_space(interp, d.input), word_space(interp, d.output)
        if geo.dom != dom or geo.cod != cod:
            raise SpaceMismatchError(f"Diagram {d.name}: semantics {geo.dom.id} -> {geo.cod.id}, "
                                     f"expected {dom.id} -> {cod.id}")
    return geo
