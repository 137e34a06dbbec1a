"""JSON loading of lookup-table Geos."""
import json
import logging
from typing import Any, Dict, List, Mapping

from ..errors import ConfigError, MissingBindingError, StructuralError
from ..perception_toolkit import PerceptionSpace
from .geo_maps import Geo, GroupHom, lookup_geo

logger = logging.getLogger(__name__)


def hom_from_dict(spec: Mapping[str, Any], dom: PerceptionSpace, cod: PerceptionSpace) -> GroupHom:
    kind = spec.get('kind', 'identity')
    if kind == 'identity':
        if not dom.group.same_table(cod.group):
            raise StructuralError(f"Identity hom between different groups {dom.group.name}, {cod.group.name}")
        return GroupHom.identity(dom.group)
    if kind == 'annihilator':
        return GroupHom.annihilator(dom.group, cod.group)
    if kind == 'explicit':
        return GroupHom.explicit(dom.group, cod.group, spec['map'])
    raise StructuralError(f"Unknown hom kind: {kind}")


def geo_from_dict(doc: Mapping[str, Any], spaces: Mapping[str, PerceptionSpace]) -> Geo:
    """``{"name", "dom", "cod", "table": [cod indices], "hom": {"kind", "map"}}``."""
    for key in ('dom', 'cod', 'table'):
        if key not in doc:
            raise ConfigError(f"Geo document needs '{key}'")
    try:
        dom = spaces[doc['dom']]
        cod = spaces[doc['cod']]
    except KeyError as e:
        raise MissingBindingError(f"Geo {doc.get('name', '?')}: unknown space {e.args[0]}") from None
    hom = hom_from_dict(doc.get('hom', {}), dom, cod) if 'hom' in doc else None
    return lookup_geo(dom, cod, doc['table'], hom, doc.get('name', 'lookup'))


def load_geos(path: str, spaces: Mapping[str, PerceptionSpace]) -> Dict[str, Geo]:
    """Load ``[geo, ...]`` or ``{"geos": [...]}`` keyed by name."""
    try:
        with open(path, encoding='utf-8') as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read Geo file {path}: {str(e)}")
        raise ConfigError(f"Cannot read Geo file {path}: {e}") from e
    docs: List[Mapping[str, Any]] = doc.get('geos', []) if isinstance(doc, dict) else doc
    geos = {}
    for d in docs:
        geo = geo_from_dict(d, spaces)
        geos[geo.name] = geo
    return geos
