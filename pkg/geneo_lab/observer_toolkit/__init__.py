"""Observer metrics toolkit."""
from .ob_category import Arrow, CategoryReport, Observer, TranslationCategory
from .ob_metrics import (
    CrossedPair, DistanceResult, EvaluationSet, LowerBound, Verdict, classifier_metric, cost,
    enumerate_crossed_pairs, equivariance_lower_bound, explained_at_level, fidelity, space_distance,
    surrogate_distance, symmetric_distance,
)
from .ob_loader import DEFAULT_BUILDERS, complexity_from_dict, load_observer, observer_from_dict

__all__ = [
    'Arrow', 'CategoryReport', 'Observer', 'TranslationCategory',
    'CrossedPair', 'DistanceResult', 'EvaluationSet', 'LowerBound', 'Verdict', 'classifier_metric', 'cost',
    'enumerate_crossed_pairs', 'equivariance_lower_bound', 'explained_at_level', 'fidelity',
    'space_distance', 'surrogate_distance', 'symmetric_distance',
    'DEFAULT_BUILDERS', 'complexity_from_dict', 'load_observer', 'observer_from_dict',
]
