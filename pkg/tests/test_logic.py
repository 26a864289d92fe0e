from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from lpctl.corpus import gen_random, gen_random_formula
from lpctl.errors import FormulaClassError, FormulaSyntaxError
from lpctl.logic import (TOP, And, Atom, LinIneq, NegAtom, Next, Or, Until, analyze, negate,
                         needed_by_depth, parse_formula, pretty, require_window, subformula_closure)
from lpctl.mccheck import Checker
from lpctl.model import Mc


def test_parse_global_f_sugar():
    phi, glob = parse_formula("AG (P[F^2 s2] >= 9/16)")
    assert glob
    assert phi == LinIneq(((Fraction(1), Until(TOP, 2, Atom("s2"))),), ">=", Fraction(9, 16))


def test_parse_negated_atom():
    assert parse_formula("!(p)") == (NegAtom("p"), False)


def test_parse_le_flips():
    phi, _ = parse_formula("P[X s1] <= 1/4")
    assert phi == LinIneq(((Fraction(-1), Next(1, Atom("s1"))),), ">=", Fraction(-1, 4))


def test_equality_is_two_inequalities():
    phi, _ = parse_formula("P[X p] = 1/2")
    assert isinstance(phi, And) and all(isinstance(x, LinIneq) for x in (phi.left, phi.right))


def test_linear_combination_and_coefficients():
    phi, _ = parse_formula("P[X p] - 6*P[F^4 q] >= 0")
    assert [c for c, _ in phi.terms] == [1, -6]


def test_implication_and_precedence():
    phi, _ = parse_formula("a -> b | c & d")
    assert phi == Or(NegAtom("a"), Or(Atom("b"), And(Atom("c"), Atom("d"))))


@pytest.mark.parametrize("text,pos", [
    ("P[X s2 >= 1", 7),
    ("p &", 3),
    ("p @ q", 2),
    ("P[X^0 p] >= 1", 4),
    ("P[X p] >= 1/0", 12),
])
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(FormulaSyntaxError) as e:
        parse_formula(text)
    assert e.value.position == pos


def test_ag_only_at_top():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("p & AG q")


def test_reserved_prop_rejected():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("__true")


def test_p_is_an_ordinary_proposition():
    phi, _ = parse_formula("P -> P[X P] >= 1")
    assert phi.left == NegAtom("P")


def test_analyze_nested_example():
    phi, _ = parse_formula("P[X (P[X^2 p1] >= 1/2)] <= 1/2 | P[F^2 p3] > 0")
    m = analyze(phi)
    assert (m.ellmax, m.window_length, m.is_flat, m.is_nonstrict) == (2, 3, False, False)


def test_analyze_atom():
    m = analyze(Atom("p"))
    assert (m.window_length, m.is_window, m.is_flat, m.is_nonstrict) == (1, True, True, True)


def test_analyze_memory_example():
    phi, _ = parse_formula("(P[F^2 s1] = 5/8) & (P[X s1] >= 1/2 | P[X s1] <= 1/4)")
    m = analyze(phi)
    assert (m.is_window, m.is_flat, m.is_nonstrict, m.window_length) == (True, True, True, 2)


def test_unbounded_is_not_window():
    phi, _ = parse_formula("P[F p] >= 1")
    assert not analyze(phi).is_window
    with pytest.raises(FormulaClassError):
        require_window(phi)


def test_closure_nested_example():
    phi, _ = parse_formula("P[X (P[X^2 p1] >= 1/2)] <= 1/2 | p2")
    s0, s1, paths = subformula_closure(phi)
    inner, _ = parse_formula("P[X^2 p1] >= 1/2")
    for h in (0, 1):
        assert Next(h, inner) in paths
    for h in (0, 1, 2):
        assert Next(h, Atom("p1")) in paths
    assert s1 == {inner, Atom("p1")}
    assert phi in s0 and Atom("p2") in s0 and phi.left in s0


def test_closure_atom_and_until():
    assert subformula_closure(Atom("p")) == (frozenset({Atom("p")}), frozenset(), frozenset())
    phi, _ = parse_formula("P[F^2 s2] >= 9/16")
    assert {p.horizon for p in subformula_closure(phi)[2]} == {0, 1, 2}


def test_needed_by_depth_shrinks_horizons():
    phi, _ = parse_formula("P[F^2 s2] >= 9/16")
    paths, _ = needed_by_depth(phi, 2)
    assert [sorted(p.horizon for p in layer) for layer in paths] == [[2], [1], [0]]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_pretty_parse_round_trip(seed):
    phi = gen_random_formula(seed)
    assert parse_formula(pretty(phi))[0] == phi
    assert parse_formula(pretty(phi, True)) == (phi, True)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
def test_negation_is_complement(fseed, mseed):
    phi = gen_random_formula(fseed)
    m = gen_random(mseed, 3, 1, 3)
    mc = Mc(m.states, m.initial, m.props, m.labels, tuple(row[0] for row in m.trans))
    ck = Checker(mc)
    assert ck.sat(negate(phi)) == [not b for b in ck.sat(phi)]
