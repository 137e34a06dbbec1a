"""GEO/GENEO toolkit."""
from .geo_maps import (
    EXHAUSTIVE, Declared, EquivarianceReport, ExpansionWitness, Geneo, Geo, GeoLike, GroupHom, NonExpansiveReport,
    Validated, as_geo, check_equivariance, check_nonexpansive, compose, copy, declare_geneo, discard,
    extensionally_equal, hom_violation, identity, lookup_geo, sample_group_probe, swap, tensor,
)
from .geo_loader import geo_from_dict, hom_from_dict, load_geos

__all__ = [
    'EXHAUSTIVE', 'Declared', 'EquivarianceReport', 'ExpansionWitness', 'Geneo', 'Geo', 'GeoLike', 'GroupHom',
    'NonExpansiveReport', 'Validated', 'as_geo', 'check_equivariance', 'check_nonexpansive', 'compose',
    'copy', 'declare_geneo', 'discard', 'extensionally_equal', 'hom_violation', 'identity', 'lookup_geo',
    'sample_group_probe', 'swap', 'tensor', 'geo_from_dict', 'hom_from_dict', 'load_geos',
]
