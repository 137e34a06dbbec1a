"""Translation categories: finite lists of GENEO arrows closed under composition."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..diagram_toolkit import ComplexityAssignment, Interpretation
from ..errors import CategoryValidationError
from ..geo_toolkit import (
    EXHAUSTIVE, Geneo, NonExpansiveReport, check_nonexpansive, compose, extensionally_equal, identity,
)
from ..perception_toolkit import PerceptionSpace, sample_probes

logger = logging.getLogger(__name__)

# Finite arrows with larger domains are re-checked on sampled pairs only.
EXHAUSTIVE_RECHECK_LIMIT = 256
SAMPLED_PAIRS = 2000
CLOSURE_PROBES = 16


@dataclass(frozen=True, eq=False)
class Arrow:
    """A translation GENEO with its declared id and kind."""

    id: str
    geneo: Geneo
    kind: str = 'lookup'

    @property
    def dom(self) -> PerceptionSpace:
        return self.geneo.dom

    @property
    def cod(self) -> PerceptionSpace:
        return self.geneo.cod

    def __call__(self, x):
        return self.geneo(x)

    def map_batch(self, xs):
        return self.geneo.map_batch(xs)

    def __repr__(self):
        return f"Arrow({self.id}: {self.dom.id} -> {self.cod.id}, {self.kind})"


@dataclass(frozen=True)
class CategoryReport:
    arrows_checked: int
    composable_pairs: int
    measure_violations: Tuple[str, ...] = ()
    skipped_measure_checks: Tuple[str, ...] = ()


def _finite(arrow: Arrow) -> bool:
    return arrow.dom.is_finite and arrow.cod.is_finite


class TranslationCategory:
    """Objects, arrows (identities included) and a closure table.

    ``closure[(i, j)] = k`` means arrow k equals "arrow i, then arrow j".
    """

    def __init__(self, objects: Iterable[PerceptionSpace], arrows: Sequence[Arrow],
                 closure: Optional[Iterable[Tuple[int, int, int]]] = None, validate: bool = True):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.objects: Dict[str, PerceptionSpace] = {}
        for obj in objects:
            self.objects[obj.id] = obj
        self.arrows: List[Arrow] = list(arrows)
        for arrow in self.arrows:
            for end in (arrow.dom, arrow.cod):
                self.objects.setdefault(end.id, end)
        ids = [a.id for a in self.arrows]
        if len(set(ids)) != len(ids):
            raise CategoryValidationError(f"Duplicate arrow ids in {ids}")

        self.identities: Dict[str, int] = {}
        for i, arrow in enumerate(self.arrows):
            if arrow.kind == 'identity' and arrow.dom == arrow.cod:
                self.identities.setdefault(arrow.dom.id, i)
        for obj_id, obj in self.objects.items():
            if obj_id not in self.identities:
                self.identities[obj_id] = len(self.arrows)
                self.arrows.append(Arrow(f'id[{obj_id}]', identity(obj), 'identity'))

        self.closure: Dict[Tuple[int, int], int] = {}
        for i, j, k in (closure or ()):
            self.closure[(int(i), int(j))] = int(k)
        self._add_units()
        if validate:
            for arrow in self.arrows:
                self._recheck(arrow)
        if closure is None:
            self._infer_closure()
        self.report = self.validate(recheck=False) if validate else None

    @classmethod
    def from_arrows(cls, objects: Iterable[PerceptionSpace], arrows: Sequence[Arrow],
                    closure: Optional[Iterable[Tuple[int, int, int]]] = None) -> 'TranslationCategory':
        return cls(objects, arrows, closure)

    def arrow_index(self, arrow_id: str) -> int:
        for i, arrow in enumerate(self.arrows):
            if arrow.id == arrow_id:
                return i
        raise CategoryValidationError(f"Unknown arrow {arrow_id}")

    def between(self, dom: PerceptionSpace, cod: PerceptionSpace) -> List[Arrow]:
        """Arrows dom -> cod in declaration order."""
        return [a for a in self.arrows if a.dom == dom and a.cod == cod]

    def composable_pairs(self) -> List[Tuple[int, int]]:
        return [(i, j) for i, a in enumerate(self.arrows) for j, b in enumerate(self.arrows) if a.cod == b.dom]

    def sub_category(self, arrow_ids: Iterable[str]) -> 'TranslationCategory':
        """The category on a subset of arrows, closure inferred again."""
        keep = set(arrow_ids)
        return TranslationCategory(self.objects.values(), [a for a in self.arrows if a.id in keep])

    # -- closure -------------------------------------------------------------

    def _add_units(self) -> None:
        for i, arrow in enumerate(self.arrows):
            self.closure.setdefault((self.identities[arrow.dom.id], i), i)
            self.closure.setdefault((i, self.identities[arrow.cod.id]), i)

    def _infer_closure(self) -> None:
        """Match every finite composite against the arrow list by its lookup table."""
        tables = {i: tuple(a.geneo.geo.lookup_table()) for i, a in enumerate(self.arrows) if _finite(a)}
        for i, j in self.composable_pairs():
            if (i, j) in self.closure:
                continue
            first, second = self.arrows[i], self.arrows[j]
            if i not in tables or j not in tables:
                raise CategoryValidationError(f"Closure of ({first.id}, {second.id}) must be declared "
                                              f"for arrows on intensional carriers")
            composite = tuple(np.asarray(tables[j])[list(tables[i])])
            for k, candidate in enumerate(self.arrows):
                if k in tables and candidate.dom == first.dom and candidate.cod == second.cod \
                        and tables[k] == composite:
                    self.closure[(i, j)] = k
                    break
            else:
                self.logger.error(f"Composite {first.id};{second.id} is not in the arrow list")
                raise CategoryValidationError(f"Not closed: {first.id} then {second.id} is not an arrow")

    # -- validation --------------------------------------------------------------

    def _recheck(self, arrow: Arrow) -> None:
        geo = arrow.geneo.geo
        if not arrow.dom.is_finite:
            return
        if arrow.dom.carrier.size <= EXHAUSTIVE_RECHECK_LIMIT:
            result = check_nonexpansive(geo, EXHAUSTIVE)
        else:
            rng = np.random.default_rng(0)
            xs = arrow.dom.elements
            idx = rng.integers(0, len(xs), size=(SAMPLED_PAIRS, 2))
            result = check_nonexpansive(geo, [(xs[a], xs[b]) for a, b in idx])
        if isinstance(result, NonExpansiveReport):
            self.logger.error(f"Arrow {arrow.id} is expansive (ratio {result.worst_ratio})")
            raise CategoryValidationError(f"Arrow {arrow.id} is not non-expansive: worst ratio "
                                          f"{result.worst_ratio}")

    def _equal(self, k: int, i: int, j: int) -> bool:
        """Is arrow k extensionally "arrow i, then arrow j"?"""
        target, first, second = self.arrows[k], self.arrows[i], self.arrows[j]
        if target.dom != first.dom or target.cod != second.cod:
            return False
        if first.dom.is_finite:
            probes = None
        else:
            probes = sample_probes(first.dom, CLOSURE_PROBES, seed=0)
        return extensionally_equal(target.geneo, compose(second.geneo, first.geneo), probes)

    def validate(self, recheck: bool = True) -> CategoryReport:
        """Re-check arrows, closure, associativity and the uniform-measure condition."""
        if recheck:
            for arrow in self.arrows:
                self._recheck(arrow)

        pairs = self.composable_pairs()
        for i, j in pairs:
            if (i, j) not in self.closure:
                raise CategoryValidationError(f"Not closed: no entry for "
                                              f"({self.arrows[i].id}, {self.arrows[j].id})")
            k = self.closure[(i, j)]
            if not 0 <= k < len(self.arrows) or not self._equal(k, i, j):
                raise CategoryValidationError(f"Closure entry ({self.arrows[i].id}, {self.arrows[j].id}) -> "
                                              f"{self.arrows[k].id if 0 <= k < len(self.arrows) else k} "
                                              f"does not match the composite")

        for i, j in pairs:
            ij = self.closure[(i, j)]
            for l, arrow in enumerate(self.arrows):
                if self.arrows[j].cod != arrow.dom:
                    continue
                left = self.closure[(ij, l)]
                right = self.closure[(i, self.closure[(j, l)])]
                if left != right and not self._same_arrow(left, right):
                    raise CategoryValidationError(f"Closure not associative at ({self.arrows[i].id}, "
                                                  f"{self.arrows[j].id}, {arrow.id})")

        measure_violations, skipped = [], []
        for arrow in self.arrows:
            if not _finite(arrow):
                skipped.append(arrow.id)
                continue
            # uniform measures: mu(L(A)) <= mu(A) for all A iff |cod| >= |dom|
            if arrow.cod.carrier.size < arrow.dom.carrier.size:
                measure_violations.append(arrow.id)
        if skipped:
            self.logger.info(f"Measure condition skipped on intensional arrows {skipped}")
        if measure_violations:
            self.logger.warning(f"Arrows {measure_violations} are not measure-decreasing")
        return CategoryReport(len(self.arrows), len(pairs), tuple(measure_violations), tuple(skipped))

    def _same_arrow(self, a: int, b: int) -> bool:
        first, second = self.arrows[a], self.arrows[b]
        if first.dom != second.dom or first.cod != second.cod:
            return False
        probes = None if first.dom.is_finite else sample_probes(first.dom, CLOSURE_PROBES, seed=0)
        return extensionally_equal(first.geneo, second.geneo, probes)

    def __repr__(self):
        return f"TranslationCategory({len(self.objects)} objects, {len(self.arrows)} arrows)"


@dataclass
class Observer:
    """Translations plus a complexity assignment; ``interpretation`` binds diagrams to Geos."""

    translations: TranslationCategory
    complexity: ComplexityAssignment
    name: str = 'observer'
    interpretation: Optional[Interpretation] = field(default=None)

    def with_translations(self, translations: TranslationCategory) -> 'Observer':
        return Observer(translations, self.complexity, self.name, self.interpretation)
