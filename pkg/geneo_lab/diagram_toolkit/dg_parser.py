"""Tokenizer and parser for diagram source files."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Tuple

from funcparserlib.lexer import LexerError, Token, TokenSpec, make_tokenizer
from funcparserlib.parser import NoParseError, finished, forward_decl, many, maybe, some

from ..errors import DslSyntaxError, DuplicateDeclarationError, LexicalError, UnknownIdentifierError
from .dg_syntax import (
    Copy, DiagramAst, Discard, Empty, Gen, GeneratorDecl, Id, Par, Seq, Signature, Swap, TypedDiagram,
    typecheck,
)

logger = logging.getLogger(__name__)

KEYWORDS = frozenset(['sort', 'gen', 'diagram', 'id', 'swap', 'copy', 'discard', 'empty', 'inf'])

_tokenizer = make_tokenizer([
    TokenSpec('space', r'\s+'),
    TokenSpec('comment', r'#[^\n]*'),
    TokenSpec('arrow', r'->'),
    TokenSpec('number', r'\d+(\.\d*)?([eE][+-]?\d+)?'),
    TokenSpec('name', r'[A-Za-z_][A-Za-z0-9_]*'),
    TokenSpec('op', r'[;:*=@\[\],()]'),
])


def tokenize(text: str) -> List[Token]:
    try:
        return [t for t in _tokenizer(text) if t.type not in ('space', 'comment')]
    except LexerError as e:
        line, column = e.place
        raise LexicalError(f"Unrecognized character: {e.msg}", line, column) from None


# -- grammar -----------------------------------------------------------------------
# Tokens are kept (not their values) so that later errors can point at them.

def _op(value):
    return some(lambda t: t.type == 'op' and t.value == value)


def _kw(value):
    return some(lambda t: t.type == 'name' and t.value == value)


_ident = some(lambda t: t.type == 'name' and t.value not in KEYWORDS)
_number = some(lambda t: t.type == 'number') | _kw('inf')
_one = some(lambda t: t.type == 'number' and t.value == '1') >> (lambda t: [])

_word = _one | ((_ident + many(-_op('*') + _ident)) >> (lambda r: [r[0]] + r[1]))

_expr = forward_decl()
_factor = (
    (_kw('id') + -_op('[') + _ident + -_op(']')) >> (lambda r: ('id', r[0], r[1]))
    | (_kw('swap') + -_op('[') + _ident + -_op(',') + _ident + -_op(']')) >> (lambda r: ('swap',) + tuple(r))
    | (_kw('copy') + -_op('[') + _ident + -_op(']')) >> (lambda r: ('copy', r[0], r[1]))
    | (_kw('discard') + -_op('[') + _ident + -_op(']')) >> (lambda r: ('discard', r[0], r[1]))
    | _kw('empty') >> (lambda t: ('empty', t))
    | _ident >> (lambda t: ('ref', t))
    | (-_op('(') + _expr + -_op(')'))
)
_term = (_factor + many(_op('*') + _factor)) >> (lambda r: ('par', r[0], r[1]))
_expr.define((_term + many(_op(';') + _term)) >> (lambda r: ('seq', r[0], r[1])))

_sort_decl = (-_kw('sort') + _ident + -_op(';')) >> (lambda t: ('sort', t))
_gen_decl = (-_kw('gen') + _ident + -_op(':') + _word + -some(lambda t: t.type == 'arrow') + _word
             + maybe(-_op('@') + _number) + -_op(';')) >> (lambda r: ('gen',) + tuple(r))
_diagram_decl = (-_kw('diagram') + _ident + -_op('=') + _expr + -_op(';')) >> (lambda r: ('diagram',) + tuple(r))
_program = many(_sort_decl | _gen_decl | _diagram_decl) + -finished


@dataclass(frozen=True)
class Program:
    """A parsed source file: its signature and its named diagrams in declaration order."""

    signature: Signature
    diagrams: Mapping[str, DiagramAst]

    def typed(self, name: str) -> TypedDiagram:
        if name not in self.diagrams:
            raise UnknownIdentifierError(f"Unknown diagram {name}")
        return typecheck(self.diagrams[name], self.signature, name)


class _Resolver:
    """Turns raw parse results into a Signature and ASTs, checking names in order."""

    def __init__(self):
        self.sorts: List[str] = []
        self.generators: Dict[str, GeneratorDecl] = {}
        self.diagrams: Dict[str, DiagramAst] = {}

    def _declare(self, tok: Token) -> str:
        name = tok.value
        if name in self.sorts or name in self.generators or name in self.diagrams:
            raise DuplicateDeclarationError(f"Duplicate declaration of {name}", *tok.start)
        return name

    def _sort(self, tok: Token) -> str:
        if tok.value not in self.sorts:
            raise UnknownIdentifierError(f"Unknown sort {tok.value}", *tok.start)
        return tok.value

    def declare(self, decl: Tuple[Any, ...]) -> None:
        kind = decl[0]
        if kind == 'sort':
            self.sorts.append(self._declare(decl[1]))
        elif kind == 'gen':
            _, tok, arity, coarity, cost = decl
            name = self._declare(tok)
            value = None
            if cost is not None:
                value = float('inf') if cost.value == 'inf' else float(cost.value)
            self.generators[name] = GeneratorDecl(name, tuple(self._sort(t) for t in arity),
                                                  tuple(self._sort(t) for t in coarity), value, tok.start)
        else:
            _, tok, raw = decl
            name = self._declare(tok)
            self.diagrams[name] = self.expr(raw)

    def expr(self, raw: Tuple[Any, ...]) -> DiagramAst:
        tag = raw[0]
        if tag in ('seq', 'par'):
            node = self.expr(raw[1])
            for op, part in raw[2]:
                node = (Seq if tag == 'seq' else Par)(node, self.expr(part), op.start)
            return node
        if tag == 'ref':
            tok = raw[1]
            if tok.value in self.generators:
                return Gen(tok.value, tok.start)
            if tok.value in self.diagrams:
                return self.diagrams[tok.value]
            raise UnknownIdentifierError(f"Unknown identifier {tok.value}", *tok.start)
        if tag == 'empty':
            return Empty(raw[1].start)
        if tag == 'swap':
            return Swap(self._sort(raw[2]), self._sort(raw[3]), raw[1].start)
        node_type = {'id': Id, 'copy': Copy, 'discard': Discard}[tag]
        return node_type(self._sort(raw[2]), raw[1].start)


def parse(text: str) -> Program:
    """Parse diagram source into its signature and named diagrams.

    Raises:
        LexicalError, DslSyntaxError, DuplicateDeclarationError, UnknownIdentifierError
    """
    tokens = tokenize(text)
    try:
        decls = _program.parse(tokens)
    except NoParseError as e:
        index = min(e.state.max, len(tokens) - 1) if tokens else 0
        if tokens and e.state.max < len(tokens):
            tok = tokens[index]
            raise DslSyntaxError(f"Unexpected {tok.value!r}", *tok.start) from None
        end = tokens[-1].end if tokens else (1, 0)
        raise DslSyntaxError("Unexpected end of input", *end) from None
    resolver = _Resolver()
    for decl in decls:
        resolver.declare(decl)
    signature = Signature(tuple(resolver.sorts), dict(resolver.generators))
    return Program(signature, dict(resolver.diagrams))


def parse_file(path: str) -> Program:
    with open(path, encoding='utf-8') as fh:
        return parse(fh.read())
