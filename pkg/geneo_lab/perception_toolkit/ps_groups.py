"""Finite groups given by composition tables."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import StructuralError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """A finite group stored extensionally.

    Elements are the ids ``0..order-1``; ``compose[a, b]`` is ``a∘b``.
    Only the shape of the tables is checked here; the group laws are checked
    by ``validate_space`` (or ``group_law_violations``) so that malformed
    groups can still be reported on.
    """

    name: str
    compose: np.ndarray
    identity: int
    inverse: np.ndarray
    factors: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        compose = np.asarray(self.compose, dtype=np.int64)
        inverse = np.asarray(self.inverse, dtype=np.int64)
        if compose.ndim != 2 or compose.shape[0] != compose.shape[1] or compose.shape[0] < 1:
            raise StructuralError(f"Group {self.name}: composition table must be square, got shape {compose.shape}")
        order = compose.shape[0]
        if compose.min() < 0 or compose.max() >= order:
            raise StructuralError(f"Group {self.name}: composition table entry out of range 0..{order - 1}")
        if inverse.shape != (order,):
            raise StructuralError(f"Group {self.name}: inverse table must have {order} entries")
        if inverse.min() < 0 or inverse.max() >= order:
            raise StructuralError(f"Group {self.name}: inverse table entry out of range")
        if not 0 <= self.identity < order:
            raise StructuralError(f"Group {self.name}: identity {self.identity} out of range")
        compose.setflags(write=False)
        inverse.setflags(write=False)
        object.__setattr__(self, 'compose', compose)
        object.__setattr__(self, 'inverse', inverse)

    @property
    def order(self) -> int:
        return int(self.compose.shape[0])

    @property
    def elements(self) -> range:
        return range(self.order)

    def mul(self, a: int, b: int) -> int:
        return int(self.compose[a, b])

    def inv(self, a: int) -> int:
        return int(self.inverse[a])

    def same_table(self, other: 'FiniteGroup') -> bool:
        """True when both groups have identical tables (same ids, same law)."""
        return (self.order == other.order and self.identity == other.identity
                and bool(np.array_equal(self.compose, other.compose)))

    def __eq__(self, other):
        return isinstance(other, FiniteGroup) and self.name == other.name and self.same_table(other)

    def __hash__(self):
        return hash((self.name, self.order))

    # -- factories -----------------------------------------------------

    @classmethod
    def trivial(cls) -> 'FiniteGroup':
        return cls('1', np.zeros((1, 1), dtype=np.int64), 0, np.zeros(1, dtype=np.int64), (1,))

    @classmethod
    def cyclic(cls, n: int) -> 'FiniteGroup':
        """Z_n with addition mod n."""
        if n < 1:
            raise StructuralError(f"Cyclic group order must be positive, got {n}")
        ids = np.arange(n)
        compose = (ids[:, None] + ids[None, :]) % n
        inverse = (-ids) % n
        return cls(f'Z{n}', compose, 0, inverse, (n,))

    @classmethod
    def direct_product(cls, a: 'FiniteGroup', b: 'FiniteGroup') -> 'FiniteGroup':
        """Componentwise product; element (x, y) has id ``x*|b| + y``."""
        if a.order == 1:
            return b
        if b.order == 1:
            return a
        nb = b.order
        xs = np.arange(a.order * nb)
        ax, bx = np.divmod(xs, nb)
        compose = a.compose[ax[:, None], ax[None, :]] * nb + b.compose[bx[:, None], bx[None, :]]
        inverse = a.inverse[ax] * nb + b.inverse[bx]
        identity = a.identity * nb + b.identity
        return cls(f'{a.name}x{b.name}', compose, identity, inverse, a.factors + b.factors)

    @classmethod
    def torus(cls, h: int, w: int) -> 'FiniteGroup':
        """Z_h × Z_w; the shift (i, j) has id ``i*w + j``."""
        group = cls.direct_product(cls.cyclic(h), cls.cyclic(w)) if h > 1 and w > 1 else \
            cls.cyclic(max(h, w))
        return cls(f'Z{h}xZ{w}', group.compose, group.identity, group.inverse, (h, w))

    def split(self, g: int, right_order: int) -> Tuple[int, int]:
        """Decompose a product element into its (left, right) components."""
        left, right = divmod(int(g), right_order)
        return left, right


def group_law_violations(group: FiniteGroup, max_triples: Optional[int] = None,
                         seed: int = 0) -> Tuple[List[Tuple[str, tuple]], bool]:
    """Return (axiom, witness) for every violated group law, and whether the check was exhaustive.

    Associativity is checked on all triples when ``order**3 <= max_triples``
    (or no budget is given), otherwise on ``max_triples`` random triples.
    """
    violations = []
    c = group.compose
    n = group.order
    e = group.identity
    ids = np.arange(n)
    exhaustive = max_triples is None or n ** 3 <= max_triples
    if exhaustive:
        for a in range(n):
            lhs = c[c[a, :][:, None], ids[None, :]]   # (a∘b)∘x
            rhs = c[a, c]                             # a∘(b∘x)
            for b, x in zip(*np.nonzero(lhs != rhs)):
                violations.append(('associativity', (a, int(b), int(x))))
    else:
        rng = np.random.default_rng(seed)
        a, b, x = rng.integers(0, n, size=(3, max_triples))
        bad = c[c[a, b], x] != c[a, c[b, x]]
        for i in np.nonzero(bad)[0]:
            violations.append(('associativity', (int(a[i]), int(b[i]), int(x[i]))))
    for g in np.nonzero(c[e, :] != ids)[0]:
        violations.append(('left identity', (int(g),)))
    for g in np.nonzero(c[:, e] != ids)[0]:
        violations.append(('right identity', (int(g),)))
    for g in np.nonzero(c[ids, group.inverse] != e)[0]:
        violations.append(('inverse', (int(g),)))
    if violations:
        logger.info(f"Group {group.name}: {len(violations)} law violations")
    return violations, exhaustive
