"""String-diagram toolkit."""
from .dg_syntax import (
    ComplexityAssignment, Copy, DiagramAst, Discard, Empty, Gen, GeneratorDecl, Id, Par, Seq, Signature, Swap,
    TypedDiagram, Word, complexity, fold, format_diagram, format_word, generators_used, par_all, seq_all,
    typecheck,
)
from .dg_parser import Program, parse, parse_file, tokenize
from .dg_semantics import Interpretation, evaluate_semantics, word_space

__all__ = [
    'ComplexityAssignment', 'Copy', 'DiagramAst', 'Discard', 'Empty', 'Gen', 'GeneratorDecl', 'Id', 'Par',
    'Seq', 'Signature', 'Swap', 'TypedDiagram', 'Word', 'complexity', 'fold', 'format_diagram',
    'format_word', 'generators_used', 'par_all', 'seq_all', 'typecheck',
    'Program', 'parse', 'parse_file', 'tokenize',
    'Interpretation', 'evaluate_semantics', 'word_space',
]
