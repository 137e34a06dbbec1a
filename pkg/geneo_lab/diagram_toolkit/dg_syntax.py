"""Diagram syntax trees, signatures, typing, printing and the complexity functor."""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple, TypeVar, Union

from ..errors import DiagramTypeError, GeneoLabError, MissingBindingError, UnknownIdentifierError

logger = logging.getLogger(__name__)

Word = Tuple[str, ...]
Position = Optional[Tuple[int, int]]
T = TypeVar('T')


# -- AST -----------------------------------------------------------------------
# Source positions never take part in equality.

@dataclass(frozen=True)
class Gen:
    name: str
    pos: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Empty:
    pos: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Id:
    sort: str
    pos: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Swap:
    left: str
    right: str
    pos: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Copy:
    sort: str
    pos: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Discard:
    sort: str
    pos: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    """``first ; second``: run first, then second."""

    first: 'DiagramAst'
    second: 'DiagramAst'
    pos: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Par:
    top: 'DiagramAst'
    bottom: 'DiagramAst'
    pos: Position = field(default=None, compare=False, repr=False)


DiagramAst = Union[Gen, Empty, Id, Swap, Copy, Discard, Seq, Par]
Leaf = Union[Gen, Empty, Id, Swap, Copy, Discard]


def children(node: DiagramAst) -> Tuple[DiagramAst, ...]:
    if isinstance(node, Seq):
        return node.first, node.second
    if isinstance(node, Par):
        return node.top, node.bottom
    return ()


def fold(ast: DiagramAst, leaf: Callable[[Leaf], T], seq: Callable[[Seq, T, T], T],
         par: Callable[[Par, T, T], T]) -> T:
    """Post-order fold without recursion (generated diagrams nest deeply)."""
    stack: List[Tuple[DiagramAst, bool]] = [(ast, False)]
    results: List[T] = []
    while stack:
        node, expanded = stack.pop()
        kids = children(node)
        if not kids:
            results.append(leaf(node))
        elif expanded:
            right = results.pop()
            left = results.pop()
            results.append(seq(node, left, right) if isinstance(node, Seq) else par(node, left, right))
        else:
            stack.append((node, True))
            stack.append((kids[1], False))
            stack.append((kids[0], False))
    return results[0]


def seq_all(parts: Iterable[DiagramAst]) -> DiagramAst:
    """Left-fold into Seq nodes; an empty sequence is Empty."""
    result = None
    for p in parts:
        result = p if result is None else Seq(result, p)
    return Empty() if result is None else result


def par_all(parts: Iterable[DiagramAst]) -> DiagramAst:
    result = None
    for p in parts:
        result = p if result is None else Par(result, p)
    return Empty() if result is None else result


# -- signatures ----------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorDecl:
    name: str
    arity: Word
    coarity: Word
    complexity: Optional[float] = None
    pos: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Signature:
    sorts: Tuple[str, ...]
    generators: Mapping[str, GeneratorDecl]

    def __post_init__(self):
        names = set(self.sorts)
        for gen in self.generators.values():
            for s in gen.arity + gen.coarity:
                if s not in names:
                    raise UnknownIdentifierError(f"Generator {gen.name} uses undeclared sort {s}",
                                                 *(gen.pos or (None, None)))

    def generator(self, name: str, pos: Position = None) -> GeneratorDecl:
        try:
            return self.generators[name]
        except KeyError:
            raise UnknownIdentifierError(f"Unknown generator {name}", *(pos or (None, None))) from None

    def require_sort(self, sort: str, pos: Position = None) -> str:
        if sort not in self.sorts:
            raise UnknownIdentifierError(f"Unknown sort {sort}", *(pos or (None, None)))
        return sort


@dataclass(frozen=True)
class TypedDiagram:
    ast: DiagramAst
    input: Word
    output: Word
    name: Optional[str] = None


def format_word(word: Word) -> str:
    return '*'.join(word) if word else '1'


def typecheck(ast: DiagramAst, sig: Signature, name: Optional[str] = None) -> TypedDiagram:
    """Infer input/output words; a Seq whose wires disagree is a DiagramTypeError."""

    def leaf(node):
        if isinstance(node, Gen):
            gen = sig.generator(node.name, node.pos)
            return gen.arity, gen.coarity
        if isinstance(node, Empty):
            return (), ()
        if isinstance(node, Id):
            s = sig.require_sort(node.sort, node.pos)
            return (s,), (s,)
        if isinstance(node, Swap):
            a, b = sig.require_sort(node.left, node.pos), sig.require_sort(node.right, node.pos)
            return (a, b), (b, a)
        if isinstance(node, Copy):
            s = sig.require_sort(node.sort, node.pos)
            return (s,), (s, s)
        if isinstance(node, Discard):
            s = sig.require_sort(node.sort, node.pos)
            return (s,), ()
        raise GeneoLabError(f"Not a diagram node: {node!r}")

    def seq(node, left, right):
        if left[1] != right[0]:
            line, column = node.pos or (None, None)
            raise DiagramTypeError(f"Sequential composition mismatch: {format_word(left[1])} ≠ "
                                   f"{format_word(right[0])}", line, column)
        return left[0], right[1]

    def par(node, top, bottom):
        return top[0] + bottom[0], top[1] + bottom[1]

    word_in, word_out = fold(ast, leaf, seq, par)
    return TypedDiagram(ast, word_in, word_out, name)


# -- printing --------------------------------------------------------------------

_SEQ, _PAR, _ATOM = 1, 2, 3


def format_diagram(ast: DiagramAst) -> str:
    """Source text with minimal parentheses; reparsing yields an equal AST."""

    def leaf(node):
        if isinstance(node, Gen):
            text = node.name
        elif isinstance(node, Empty):
            text = 'empty'
        elif isinstance(node, Id):
            text = f'id[{node.sort}]'
        elif isinstance(node, Swap):
            text = f'swap[{node.left},{node.right}]'
        elif isinstance(node, Copy):
            text = f'copy[{node.sort}]'
        else:
            text = f'discard[{node.sort}]'
        return text, _ATOM

    def wrap(part, minimum):
        text, prec = part
        return text if prec >= minimum else f'({text})'

    def seq(node, left, right):
        return f'{wrap(left, _SEQ)} ; {wrap(right, _PAR)}', _SEQ

    def par(node, top, bottom):
        return f'{wrap(top, _PAR)} * {wrap(bottom, _ATOM)}', _PAR

    return fold(ast, leaf, seq, par)[0]


# -- complexity ------------------------------------------------------------------

class ComplexityAssignment:
    """Generator name to nonnegative real (``inf`` for inaccessible black boxes)."""

    def __init__(self, values: Mapping[str, float], name: str = 'default'):
        self.name = name
        self.values: Dict[str, float] = {}
        for gen, value in values.items():
            value = float(value)
            if math.isnan(value) or value < 0:
                raise GeneoLabError(f"Complexity of {gen} must be a nonnegative real, got {value}")
            self.values[gen] = value

    @classmethod
    def from_signature(cls, sig: Signature, overrides: Optional[Mapping[str, float]] = None,
                       name: str = 'default') -> 'ComplexityAssignment':
        """``@`` annotations from the source, overridden per observer."""
        values = {g.name: g.complexity for g in sig.generators.values() if g.complexity is not None}
        values.update(overrides or {})
        return cls(values, name)

    def __getitem__(self, gen: str) -> float:
        try:
            return self.values[gen]
        except KeyError:
            logger.error(f"No complexity for generator {gen} under {self.name}")
            raise MissingBindingError(f"Assignment {self.name} has no complexity for generator {gen}") from None

    def __contains__(self, gen: str) -> bool:
        return gen in self.values

    def __repr__(self):
        return f"ComplexityAssignment({self.name!r}, {len(self.values)} generators)"


def complexity(d: Union[TypedDiagram, DiagramAst], c: ComplexityAssignment) -> float:
    """Sum of generator complexities; structural nodes cost 0."""
    ast = d.ast if isinstance(d, TypedDiagram) else d
    return fold(ast,
                lambda node: c[node.name] if isinstance(node, Gen) else 0.0,
                lambda node, a, b: a + b,
                lambda node, a, b: a + b)


def generators_used(ast: DiagramAst) -> List[str]:
    names: List[str] = []
    fold(ast,
         lambda node: names.append(node.name) if isinstance(node, Gen) else None,
         lambda node, a, b: None,
         lambda node, a, b: None)
    return names
