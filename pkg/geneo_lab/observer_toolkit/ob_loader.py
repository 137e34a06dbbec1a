"""JSON loading of observers."""
import json
import logging
from dataclasses import replace
from typing import Any, Callable, Dict, Mapping, Optional

from ..diagram_toolkit import ComplexityAssignment
from ..errors import ConfigError, MissingBindingError, SpaceMismatchError
from ..geo_toolkit import Geneo, check_nonexpansive, declare_geneo, geo_from_dict, identity
from ..perception_toolkit import PerceptionSpace, parse_number
from .ob_category import Arrow, Observer, TranslationCategory

logger = logging.getLogger(__name__)

# kind -> builder(dom, cod, arrow document) -> Geneo
ArrowBuilder = Callable[[PerceptionSpace, PerceptionSpace, Mapping[str, Any]], Geneo]


def _lookup_arrow(dom: PerceptionSpace, cod: PerceptionSpace, doc: Mapping[str, Any]) -> Geneo:
    geo = geo_from_dict(dict(doc, dom=dom.id, cod=cod.id, name=doc['id']), {dom.id: dom, cod.id: cod})
    certificate = doc.get('certificate', {'kind': 'validated'})
    if certificate.get('kind') == 'declared':
        return declare_geneo(geo, certificate.get('reason', 'declared in observer file'))
    result = check_nonexpansive(geo)
    if isinstance(result, Geneo):
        return result
    # kept as declared so that category validation names the arrow
    return declare_geneo(geo, f"expansive lookup arrow, worst ratio {result.worst_ratio}")


def _identity_arrow(dom: PerceptionSpace, cod: PerceptionSpace, doc: Mapping[str, Any]) -> Geneo:
    if dom != cod:
        raise ConfigError(f"Identity arrow {doc['id']} between different spaces {dom.id}, {cod.id}")
    return identity(dom)


def _rescale_arrow(dom: PerceptionSpace, cod: PerceptionSpace, doc: Mapping[str, Any]) -> Geneo:
    """2×2 max downscaling; the domain needs stride-2 translations (or none) to halve onto ``cod``."""
    # surrogate_toolkit imports this package
    from ..surrogate_toolkit.sg_patterns import downscale_geo
    try:
        geneo = downscale_geo(dom, cod)
    except SpaceMismatchError as e:
        logger.error(f"Rescale arrow {doc['id']}: {str(e)}")
        raise ConfigError(f"Rescale arrow {doc['id']} from {dom.id} to {cod.id}: {e}") from e
    geo = replace(geneo.geo, name=doc['id'])
    certificate = doc.get('certificate', {})
    if certificate.get('kind') == 'declared':
        return declare_geneo(geo, certificate.get('reason', 'declared in observer file'))
    return Geneo(geo, geneo.certificate)


DEFAULT_BUILDERS: Dict[str, ArrowBuilder] = {
    'identity': _identity_arrow,
    'lookup': _lookup_arrow,
    'rescale2x2max': _rescale_arrow,
}


def complexity_from_dict(doc: Mapping[str, Any], name: str = 'observer') -> ComplexityAssignment:
    return ComplexityAssignment({gen: parse_number(v) for gen, v in doc.items()}, name)


def observer_from_dict(doc: Mapping[str, Any], spaces: Mapping[str, PerceptionSpace],
                       builders: Optional[Mapping[str, ArrowBuilder]] = None) -> Observer:
    """``{"translations": {"objects", "arrows", "closure"}, "complexity": {...}, "name"}``."""
    builders = dict(DEFAULT_BUILDERS, **(builders or {}))
    translations = doc.get('translations', {})

    def space(space_id):
        try:
            return spaces[space_id]
        except KeyError:
            logger.error(f"Observer refers to unknown space {space_id}")
            raise MissingBindingError(f"Unknown space {space_id}") from None

    objects = [space(s) for s in translations.get('objects', [])]
    arrows = []
    for arrow_doc in translations.get('arrows', []):
        kind = arrow_doc.get('kind', 'lookup')
        if kind not in builders:
            raise ConfigError(f"Unknown arrow kind {kind} for arrow {arrow_doc.get('id')}")
        dom, cod = space(arrow_doc['dom']), space(arrow_doc['cod'])
        arrows.append(Arrow(arrow_doc['id'], builders[kind](dom, cod, arrow_doc), kind))
    closure = translations.get('closure')
    category = TranslationCategory(objects, arrows, [tuple(c) for c in closure] if closure is not None else None)
    name = doc.get('name', 'observer')
    return Observer(category, complexity_from_dict(doc.get('complexity', {}), name), name)


def load_observer(path: str, spaces: Mapping[str, PerceptionSpace],
                  builders: Optional[Mapping[str, ArrowBuilder]] = None) -> Observer:
    try:
        with open(path, encoding='utf-8') as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read observer file {path}: {str(e)}")
        raise ConfigError(f"Cannot read observer file {path}: {e}") from e
    return observer_from_dict(doc, spaces, builders)
