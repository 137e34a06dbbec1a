"""Perception spaces toolkit."""
from .ps_groups import FiniteGroup, group_law_violations
from .ps_space import (
    INF, ArgmaxDiscreteMetric, DiscreteMetric, ExplicitTableMetric, FiniteCarrier, GroupDistance,
    ImageCarrier, L1Metric, LInfinityMetric, PerceptionSpace, PermutationAction, ProductAction,
    PseudoMetric, TorusTranslationAction, TrivialAction, ValidationReport, Violation,
    class_label_space, element_parts, finite_space, freeze, image_space, induced_group_metric,
    join_parts, metric_value, orbit_space, product_space, sample_probes, score_space,
    split_element, unit_space, validate_space,
)
from .ps_loader import load_space, load_spaces, parse_number, space_from_dict

__all__ = [
    'FiniteGroup', 'group_law_violations',
    'INF', 'ArgmaxDiscreteMetric', 'DiscreteMetric', 'ExplicitTableMetric', 'FiniteCarrier',
    'GroupDistance', 'ImageCarrier', 'L1Metric', 'LInfinityMetric', 'PerceptionSpace',
    'PermutationAction', 'ProductAction', 'PseudoMetric', 'TorusTranslationAction', 'TrivialAction',
    'ValidationReport', 'Violation', 'class_label_space', 'element_parts', 'finite_space', 'freeze',
    'image_space', 'induced_group_metric', 'join_parts', 'metric_value', 'orbit_space',
    'product_space', 'sample_probes', 'score_space', 'split_element', 'unit_space', 'validate_space',
    'load_space', 'load_spaces', 'parse_number', 'space_from_dict',
]
