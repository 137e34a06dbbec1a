"""JSON loading of perception spaces."""
import json
import logging
from typing import Any, Dict, List, Optional

import numpy as np

from ..errors import ConfigError, StructuralError
from .ps_groups import FiniteGroup
from .ps_space import (
    ArgmaxDiscreteMetric, DiscreteMetric, ExplicitTableMetric, L1Metric, LInfinityMetric,
    PerceptionSpace, PseudoMetric, finite_space, image_space, score_space,
)

logger = logging.getLogger(__name__)


def parse_number(value: Any) -> float:
    """Numbers may be written as JSON numbers or as the strings "inf"/"infinity"."""
    if isinstance(value, str) and value.strip().lower() in ('inf', 'infinity', '+inf'):
        return float('inf')
    try:
        return float(value)
    except (TypeError, ValueError):
        raise StructuralError(f"Not a number: {value!r}") from None


def metric_from_dict(spec: Optional[Dict[str, Any]]) -> PseudoMetric:
    spec = spec or {'kind': 'discrete'}
    kind = spec.get('kind', 'discrete')
    if kind == 'discrete':
        return DiscreteMetric()
    if kind == 'l1':
        return L1Metric()
    if kind in ('linf', 'linfinity'):
        return LInfinityMetric()
    if kind == 'argmax':
        return ArgmaxDiscreteMetric()
    if kind == 'table':
        table = [[parse_number(v) for v in row] for row in spec.get('table', [])]
        return ExplicitTableMetric(np.array(table, dtype=np.float64), strict=spec.get('strict', True))
    raise StructuralError(f"Unknown metric kind: {kind}")


def group_from_dict(spec: Optional[Dict[str, Any]]) -> FiniteGroup:
    spec = spec or {'kind': 'trivial'}
    kind = spec.get('kind', 'explicit' if 'compose' in spec else 'trivial')
    if kind == 'trivial':
        return FiniteGroup.trivial()
    if kind == 'cyclic':
        return FiniteGroup.cyclic(int(spec['order']))
    if kind == 'torus':
        return FiniteGroup.torus(int(spec['height']), int(spec['width']))
    if kind == 'explicit':
        compose = np.array(spec['compose'], dtype=np.int64)
        identity = int(spec.get('identity', 0))
        if 'inverse' in spec:
            inverse = np.array(spec['inverse'], dtype=np.int64)
        else:
            # first g with g∘h = identity, per row
            inverse = np.argmax(compose == identity, axis=1)
        return FiniteGroup(spec.get('name', 'G'), compose, identity, inverse)
    raise StructuralError(f"Unknown group kind: {kind}")


def space_from_dict(doc: Dict[str, Any]) -> PerceptionSpace:
    """Build a space from its JSON document.

    Finite spaces carry ``elements``; image spaces carry
    ``{"carrier": {"kind": "images", "height", "width"}, "action": {"kind": "torus", "stride"}}``.
    """
    if 'id' not in doc:
        raise ConfigError("Space document needs an 'id'")
    space_id = doc['id']
    carrier = doc.get('carrier', {})
    action = doc.get('action', {})
    if carrier.get('kind') in ('images', 'scores'):
        if carrier['kind'] == 'scores':
            return score_space(space_id, int(carrier.get('classes', 10)))
        metric = metric_from_dict(doc.get('metric', {'kind': 'linf'}))
        return image_space(space_id, int(carrier['height']), int(carrier['width']),
                           stride=int(action.get('stride', 1)),
                           translations=action.get('kind', 'torus') == 'torus', metric=metric)
    if 'elements' not in doc:
        raise ConfigError(f"Space {space_id}: finite spaces need 'elements'")
    group = group_from_dict(doc.get('group'))
    table = action.get('table')
    return finite_space(space_id, doc['elements'], metric_from_dict(doc.get('metric')), group,
                        None if table is None else np.array(table, dtype=np.int64),
                        element_kind=doc.get('element_kind', 'token'))


def load_spaces(path: str) -> List[PerceptionSpace]:
    """Load one space document, a list of them, or ``{"spaces": [...]}``."""
    try:
        with open(path, encoding='utf-8') as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read space file {path}: {str(e)}")
        raise ConfigError(f"Cannot read space file {path}: {e}") from e
    if isinstance(doc, dict) and 'spaces' in doc:
        doc = doc['spaces']
    docs = doc if isinstance(doc, list) else [doc]
    return [space_from_dict(d) for d in docs]


def load_space(path: str) -> PerceptionSpace:
    return load_spaces(path)[0]
