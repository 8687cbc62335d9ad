import pytest
from hypothesis import given, strategies as st
from sympy import Rational

from cli.verify_suite import d_scheme_checks, scheme_checks
from core.errors import IndexRangeError
from core.schemes import (C_matrix, D_matrix, SCHEMES, c_closed_form, c_coeff, d_coeff, gamma_diag,
                          hurwitz_gamma)


def test_base_values():
    assert d_coeff(0, 1) == 1
    assert d_coeff(2, 2) == Rational(3, 2)
    assert c_coeff(4, 3) == 1
    assert d_coeff(5, 3) == Rational(3, 2)
    assert d_coeff(6, 3) == Rational(7, 5)


def test_first_column_is_constant_one():
    assert all(c_coeff(m, 1) == 1 for m in range(12))


@given(l=st.integers(min_value=1, max_value=6), extra=st.integers(min_value=0, max_value=12))
def test_c_matches_binomial_closed_form(l, extra):
    m = 2 * l - 2 + extra
    assert c_coeff(m, l) == c_closed_form(m, l)
    assert c_coeff(m + 1, l) == c_coeff(m, l) * d_coeff(m, l)


@pytest.mark.parametrize("m, l", [(0, 2), (3, 3), (1, 0)])
def test_out_of_range_indices(m, l):
    with pytest.raises(IndexRangeError):
        d_coeff(m, l)
    with pytest.raises(IndexRangeError):
        c_coeff(m, l)


def test_diagonal_widths():
    assert len(D_matrix(1)) == 1
    assert len(D_matrix(4)) == 2
    assert len(C_matrix(5)) == 3
    assert C_matrix(4) == [c_coeff(4, 1), c_coeff(4, 2)]
    with pytest.raises(IndexRangeError):
        D_matrix(0)


def test_gamma_and_hurwitz_coefficients():
    assert gamma_diag(2) == [4, 1]
    assert gamma_diag(3) == [15, 5, 1]
    assert hurwitz_gamma(0, 3, 1) == 1
    assert hurwitz_gamma(1, 1, 0) == Rational(3, 2)
    with pytest.raises(IndexRangeError):
        hurwitz_gamma(4, 3, 0)
    with pytest.raises(IndexRangeError):
        gamma_diag(0)


def test_corruption_is_scoped():
    before = c_coeff(6, 3)
    with SCHEMES.corrupted(5, 3, 2):
        assert d_coeff(5, 3) == 2
        assert c_coeff(6, 3) != c_closed_form(6, 3)
    assert d_coeff(5, 3) == Rational(3, 2)
    assert c_coeff(6, 3) == before == c_closed_form(6, 3)


def test_corruption_restores_after_error():
    with pytest.raises(RuntimeError):
        with SCHEMES.corrupted(4, 2, 0):
            raise RuntimeError("boom")
    assert d_coeff(4, 2) == Rational(5, 4)


def test_d_first_column_and_ratios_by_value():
    assert all(d_coeff(m, 1) == 1 for m in range(12))
    assert d_coeff(4, 3) / d_coeff(3, 2) == d_coeff(4, 2) == Rational(5, 4)
    assert d_coeff(5, 3) / d_coeff(4, 2) == d_coeff(5, 2) == Rational(6, 5)
    assert d_coeff(5, 3) / d_coeff(3, 1) == d_coeff(4, 2) * d_coeff(5, 2) == Rational(3, 2)


@pytest.mark.parametrize("k_max", [1, 2, 3, 4])
def test_d_scheme_identities_hold(k_max):
    checks = d_scheme_checks(k_max)
    assert len(checks) > 2 * k_max
    assert all(check for _, check in checks)
    assert all(check for _, check in scheme_checks(k_max))


def test_corrupted_entry_breaks_d_identities():
    with SCHEMES.corrupted(5, 3, 2):
        failed = {check.where for _, check in d_scheme_checks(3) if not check}
    assert failed == {"d_{5,3}", "d_{6,4}"}
    assert all(check for _, check in d_scheme_checks(3))
