"""Tests for the diagram language: parsing, typing, semantics and complexity."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geneo_lab.diagram_toolkit import (
    ComplexityAssignment, Copy, Gen, Id, Interpretation, Par, Seq, Swap, complexity, evaluate_semantics,
    format_diagram, parse, typecheck, word_space,
)
from geneo_lab.errors import (
    DiagramTypeError, DslSyntaxError, DuplicateDeclarationError, LexicalError, MissingBindingError,
    UnknownIdentifierError,
)
from geneo_lab.geo_toolkit import compose, extensionally_equal, lookup_geo, tensor
from geneo_lab.harness_toolkit.hx_verify import build_functor_instance, check_functor_laws
from geneo_lab.perception_toolkit import finite_space

ABC = """
sort A; sort B; sort C; sort D;
gen f: A -> B @ 3;
gen g: B -> C @ 5;
gen h: C -> D;
"""


def test_parse_sequential_pipeline():
    program = parse("sort A; gen f : A -> A @2; diagram d = f ; f;")
    assert program.diagrams['d'] == Seq(Gen('f'), Gen('f'))
    assert program.signature.generators['f'].complexity == 2.0


def test_parse_structural_factors():
    program = parse("sort A; sort B; diagram d = id[A] * swap[A,B];")
    assert program.diagrams['d'] == Par(Id('A'), Swap('A', 'B'))


def test_unknown_identifier_points_at_name():
    with pytest.raises(UnknownIdentifierError) as e:
        parse("sort A; gen f: A -> A;\ndiagram d = f ; g;")
    assert (e.value.line, e.value.column) == (2, 17)


def test_lexical_and_syntax_errors():
    with pytest.raises(LexicalError):
        parse("sort A$;")
    with pytest.raises(DslSyntaxError):
        parse("sort A; gen f: A -> ;")


def test_duplicate_declaration():
    with pytest.raises(DuplicateDeclarationError):
        parse("sort A; gen A: A -> A;")


def test_comments_and_unit_words():
    program = parse("# header\nsort A; gen drop: A -> 1 @ inf; diagram d = drop;")
    typed = program.typed('d')
    assert typed.output == ()
    assert math.isinf(program.signature.generators['drop'].complexity)


def test_typecheck_sequential_and_parallel():
    sig = parse(ABC).signature
    assert typecheck(Seq(Gen('f'), Gen('g')), sig).input == ('A',)
    assert typecheck(Seq(Gen('f'), Gen('g')), sig).output == ('C',)
    par = typecheck(Par(Gen('f'), Gen('h')), sig)
    assert (par.input, par.output) == (('A', 'C'), ('B', 'D'))


def test_typecheck_reports_both_words():
    sig = parse(ABC + "gen k: A -> C;").signature
    with pytest.raises(DiagramTypeError, match='B ≠ A'):
        typecheck(Seq(Gen('f'), Gen('k')), sig)


def test_complexity_is_additive():
    program = parse(ABC)
    c = ComplexityAssignment.from_signature(program.signature)
    assert complexity(Id('A'), c) == 0
    assert complexity(Seq(Gen('f'), Gen('g')), c) == 8
    assert complexity(Par(Gen('f'), Gen('g')), c) == 8


def test_complexity_needs_every_generator():
    c = ComplexityAssignment.from_signature(parse(ABC).signature)
    with pytest.raises(MissingBindingError):
        complexity(Gen('h'), c)


def test_overrides_beat_annotations():
    c = ComplexityAssignment.from_signature(parse(ABC).signature, {'f': 0, 'h': 1})
    assert complexity(Seq(Seq(Gen('f'), Gen('g')), Gen('h')), c) == 6


def test_negative_complexity_is_rejected():
    with pytest.raises(ValueError):
        ComplexityAssignment({'f': -1})


def three_point_interpretation():
    sorts = {s: finite_space(s, [f'{s.lower()}{i}' for i in range(3)]) for s in 'ABC'}
    interp = Interpretation(sorts, {})
    interp.generators['f'] = lookup_geo(sorts['A'], sorts['B'], [2, 2, 0], name='f')
    interp.generators['g'] = lookup_geo(sorts['B'], sorts['C'], [1, 0, 1], name='g')
    return interp


def test_semantics_of_sequence_chases_indices():
    interp = three_point_interpretation()
    sig = parse("sort A; sort B; sort C; gen f: A -> B; gen g: B -> C;").signature
    geo = evaluate_semantics(typecheck(Seq(Gen('f'), Gen('g')), sig), interp)
    assert [geo(x) for x in ('a0', 'a1', 'a2')] == ['c1', 'c1', 'c1']
    assert extensionally_equal(geo, compose(interp.generators['g'], interp.generators['f']))


def test_semantics_of_identity():
    interp = three_point_interpretation()
    sig = parse("sort A;").signature
    geo = evaluate_semantics(typecheck(Id('A'), sig), interp)
    assert all(geo(x) == x for x in geo.dom.elements)


def test_copy_is_natural():
    interp = three_point_interpretation()
    sig = parse("sort A; sort B; gen f: A -> B;").signature
    left = evaluate_semantics(typecheck(Seq(Copy('A'), Par(Gen('f'), Gen('f'))), sig), interp)
    right = evaluate_semantics(typecheck(Seq(Gen('f'), Copy('B')), sig), interp)
    assert extensionally_equal(left, right)


def test_word_space_of_pair():
    interp = three_point_interpretation()
    space = word_space(interp, ('A', 'B'))
    assert space.carrier.size == 9
    assert space.id == 'A⊗B'


def test_missing_binding():
    interp = three_point_interpretation()
    sig = parse("sort A; gen q: A -> A;").signature
    with pytest.raises(MissingBindingError):
        evaluate_semantics(typecheck(Gen('q'), sig), interp)


def test_printing_reparses_to_the_same_tree():
    sig_text = "sort A; sort B; gen f: A -> B; gen g: B -> A;"
    program = parse(sig_text + "\ngen k: A -> A;")
    ast = Seq(Par(Gen('f'), Id('A')), Seq(Swap('B', 'A'), Par(Gen('k'), Gen('g'))))
    text = format_diagram(ast)
    again = parse(sig_text + "\ngen k: A -> A;\n" + f"diagram d = {text};").diagrams['d']
    assert again == ast
    assert typecheck(again, program.signature).output == ('A', 'A')


def test_functor_laws_on_a_fixed_seed():
    assert check_functor_laws(build_functor_instance(7)) == []


@given(st.integers(0, 10 ** 6))
def test_functor_laws(seed):
    inst = build_functor_instance(seed)
    assert check_functor_laws(inst) == []


@given(st.integers(0, 10 ** 6))
def test_adding_a_costly_branch_increases_complexity(seed):
    inst = build_functor_instance(seed)
    c = ComplexityAssignment(dict(inst.assignment.values, extra=1.0))
    base = Seq(inst.chain[0], inst.chain[1])
    assert complexity(Par(base, Gen('extra')), c) > complexity(base, c)


def test_tensor_of_lookups_matches_par():
    interp = three_point_interpretation()
    sig = parse("sort A; sort B; sort C; gen f: A -> B; gen g: B -> C;").signature
    geo = evaluate_semantics(typecheck(Par(Gen('f'), Gen('g')), sig), interp)
    direct = tensor(interp.generators['f'], interp.generators['g'])
    assert extensionally_equal(geo, direct)
    assert geo(('a0', 'b1')) == ('b2', 'c0')
    assert np.array_equal(geo.lookup_table(), direct.lookup_table())
