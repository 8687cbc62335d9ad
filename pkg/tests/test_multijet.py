from itertools import permutations
from math import factorial

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from sympy import ImmutableMatrix, Rational

from core.errors import DimensionError, InvalidJetError, JetOrderError
from core.multijet import (FLOAT, CurveJet, MapJet, apply_form, compose_curve, eval_map, jacobian,
                           to_exact, to_float_array)


def pitchfork_jet():
    return MapJet.from_terms(2, 1, [[("1", [1, 1]), ("-1", [0, 3])]])


def test_to_exact_parses_rationals_and_binary_floats():
    assert to_exact("1/2") == Rational(1, 2)
    assert to_exact(" -3 ") == -3
    assert to_exact(0.1) == Rational(0.1)
    assert to_exact(0.1) != Rational(1, 10)


def test_constant_term_rejected():
    with pytest.raises(InvalidJetError):
        MapJet.from_terms(1, 1, [[("1", [0])]])


def test_exponent_length_checked():
    with pytest.raises(DimensionError):
        MapJet.from_terms(2, 1, [[("1", [1])]])


def test_declared_order_limits_composition():
    jet = MapJet.from_terms(1, 1, [[("1", [2])]], order=3)
    curve = CurveJet.from_taylor([[1]])
    with pytest.raises(JetOrderError):
        compose_curve(jet, curve, 4)


def test_taylor_coefficients_use_factorial_convention():
    curve = CurveJet.from_taylor([[0, 1], [1, 0], ["1/3", 0]])
    assert curve.bar(2) == ImmutableMatrix([2, 0])
    assert curve.bar(3) == ImmutableMatrix([2, 0])
    assert curve.bar(7) == ImmutableMatrix([0, 0])
    assert curve.leading_index == 1
    assert [list(c) for c in curve.taylor()] == [[0, 1], [1, 0], [Rational(1, 3), 0]]


def test_all_zero_curve_rejected():
    with pytest.raises(InvalidJetError):
        CurveJet.from_bar([[0, 0], [0, 0]])


def test_pitchfork_curve_is_exact_solution():
    curve = CurveJet.from_taylor([[0, 1], [1, 0]])
    assert all(t == ImmutableMatrix([0]) for t in compose_curve(pitchfork_jet(), curve, 8))


def test_compose_square():
    jet = MapJet.from_terms(1, 1, [[("1", [2])]])
    values = compose_curve(jet, CurveJet.from_taylor([[1]]), 3)
    assert values == [ImmutableMatrix([0]), ImmutableMatrix([2]), ImmutableMatrix([0])]


def test_eval_and_jacobian_exact_and_float_agree():
    jet = pitchfork_jet()
    point = [Rational(1, 3), Rational(1, 2)]
    assert eval_map(jet, point) == ImmutableMatrix([Rational(1, 6) - Rational(1, 8)])
    assert jacobian(jet, point) == ImmutableMatrix([[Rational(1, 2), Rational(1, 3) - Rational(3, 4)]])
    assert eval_map(jet, [1 / 3, 0.5], FLOAT)[0] == pytest.approx(1 / 6 - 1 / 8)
    np.testing.assert_allclose(jacobian(jet, [1 / 3, 0.5], FLOAT), [[0.5, 1 / 3 - 0.75]])


def test_symmetric_form_values():
    jet = MapJet.from_terms(2, 1, [[("1", [1, 1])]])
    form = jet.form(2)
    assert form.apply_grouped([([1, 1], 2)]) == ImmutableMatrix([2])
    assert form.apply_grouped([([1, 0], 1), ([0, 1], 1)]) == ImmutableMatrix([1])
    assert jet.form(3).is_zero


def test_add_terms_merges_monomials():
    jet = pitchfork_jet().add_terms([[("1", [0, 3]), ("2", [0, 5])]])
    assert jet.components[0] == {(1, 1): 1, (0, 5): 2}
    assert jet.degree == 5
    assert jet.lowest_order == 2


def test_curve_point_modes():
    curve = CurveJet.from_taylor([[0, 1], [1, 0]])
    assert curve.point(Rational(1, 2)) == ImmutableMatrix([Rational(1, 4), Rational(1, 2)])
    np.testing.assert_allclose(curve.point(0.5, FLOAT), [0.25, 0.5])


def test_to_float_array_complex_fallback():
    out = to_float_array(ImmutableMatrix([1 + sympy.I]))
    assert out.dtype == complex


small = st.integers(min_value=-3, max_value=3)


@settings(max_examples=30, deadline=None)
@given(coefs=st.lists(small, min_size=4, max_size=4), curve=st.lists(st.tuples(small, small), min_size=1, max_size=3))
def test_compose_matches_symbolic_expansion(coefs, curve):
    exponents = [[1, 0], [1, 1], [0, 2], [2, 1]]
    terms = [(c, e) for c, e in zip(coefs, exponents) if c]
    if not terms or not any(any(c) for c in curve):
        return
    jet = MapJet.from_terms(2, 1, [terms])
    jc = CurveJet.from_taylor([list(c) for c in curve])
    eps = sympy.Symbol("eps")
    x = sum(c[0] * eps ** (i + 1) for i, c in enumerate(curve))
    y = sum(c[1] * eps ** (i + 1) for i, c in enumerate(curve))
    expr = sympy.expand(sum(c * x ** e[0] * y ** e[1] for c, e in terms))
    order = 6
    values = compose_curve(jet, jc, order)
    for i in range(1, order + 1):
        assert values[i - 1][0] == expr.coeff(eps, i) * factorial(i)


vectors = st.lists(st.integers(min_value=-2, max_value=2), min_size=2, max_size=2)


@settings(max_examples=20, deadline=None)
@given(args=st.lists(vectors, min_size=3, max_size=3))
def test_apply_form_is_symmetric(args):
    jet = MapJet.from_terms(2, 2, [[("1", [2, 1]), ("-2", [0, 3])], [("1/3", [1, 2])]])
    form = jet.form(3)
    values = {apply_form(form, list(p)) for p in permutations(args)}
    assert len(values) == 1


def test_apply_form_counts_arguments():
    with pytest.raises(DimensionError):
        apply_form(pitchfork_jet().form(3), [[1, 0]])
