import time

import pytest
from sympy import ImmutableMatrix, Rational, Symbol, expand, factorial, series, sqrt

from core.analysis import (EXACT_ZERO, NotTransversal, Verdict, approximation_order, arc_prefix,
                           bifurcation_verdict, cone_report, curve_samples, degree_signs, find_minimal_k,
                           milnor_from_branches, perturbation_stable)
from core.errors import IndexRangeError, InvalidJetError, NotTransversalError
from core.multijet import CurveJet, MapJet, compose_curve
from core.resolution import build_resolution


@pytest.mark.parametrize("name, k, chi, l", [
    ("pitchfork", 1, 1, 1),
    ("node", 1, 1, 1),
    ("secondary", 3, 3, 1),
    ("primary", 11, 11, 3),
])
def test_bundled_problem_summaries(analyzed, name, k, chi, l):
    report, res = analyzed(name)
    assert (report.k, report.chi, report.l) == (k, chi, l)
    assert report.transversal and res.transversal
    assert sum(report.nc_dims) == res.m


@pytest.mark.parametrize("name", ["pitchfork", "node", "secondary"])
def test_bifurcation_verdicts(analyzed, name):
    report, _ = analyzed(name)
    assert report.verdict is Verdict.BIFURCATION
    assert report.p_dim == 0
    assert report.preconditions == ()


def test_exact_branches(analyzed):
    assert analyzed("pitchfork")[0].approximation.order == EXACT_ZERO
    assert analyzed("node")[0].approximation.order == EXACT_ZERO


def test_primary_approximation_order(analyzed):
    report, _ = analyzed("primary")
    assert report.approximation.holds
    assert report.approximation.first_nonzero == 24
    assert report.approximation.order == 23


def test_regular_point(analyzed):
    report, res = analyzed("regular")
    assert report.k == 1 and report.chi == 0
    assert report.avoid_dropped and report.diagnostics
    assert report.kernel_dim == 0
    assert not report.approximation.holds
    assert report.verdict is Verdict.NOT_APPLICABLE
    assert report.to_dict()["verdict"] == "not-applicable"


def test_not_transversal_is_a_value():
    jet = MapJet.from_terms(2, 2, [[("1", [1, 0])], []])
    found = cone_report(jet, CurveJet.from_bar([[0, 1]]), 3)
    assert isinstance(found, NotTransversal)
    assert found.range_sums == (1, 1, 1, 1)
    assert found.m == 2
    assert found.to_dict()["transversal"] is False


def test_k_max_below_leading_index(problems):
    with pytest.raises(IndexRangeError):
        find_minimal_k(problems["primary"].jet, problems["primary"].curve, 2)


def test_verdict_rules():
    assert bifurcation_verdict(1, 3) is Verdict.BIFURCATION
    assert bifurcation_verdict(2, 3) is Verdict.INCONCLUSIVE
    assert bifurcation_verdict(1, 2) is Verdict.INCONCLUSIVE
    assert bifurcation_verdict(1, 1, field="complex") is Verdict.NOT_APPLICABLE
    assert bifurcation_verdict(1, 1, preconditions=["x"]) is Verdict.NOT_APPLICABLE


def test_approximation_report_with_missing_tail(problems):
    problem = problems["pitchfork"]
    short = CurveJet.from_bar(problem.curve.bars(1))
    report = approximation_order(problem.jet, short, 4)
    assert report.missing_tail == (2, 3, 4)
    assert report.first_nonzero == 3
    assert not report.holds


def test_degree_signs_along_secondary_centre_line(analyzed):
    _, res = analyzed("secondary")
    signs = degree_signs(res, curve_samples(res, [0.1, 0.05, 0.02, -0.1, -0.05, -0.02]))
    assert signs.constant and signs.differ


def test_degree_signs_need_real_field():
    jet = MapJet.from_terms(1, 1, [[("1", [2])]], field="complex")
    res = find_minimal_k(jet, CurveJet.from_bar([[1]]), 4)[1]
    with pytest.raises(InvalidJetError):
        degree_signs(res, [(0.1, [0.1])])


def test_milnor_number():
    assert milnor_from_branches([11, 3], 4) == 11


def test_high_order_perturbation_keeps_resolution(problems):
    problem = problems["primary"]
    outcome = perturbation_stable(problem.jet, problem.curve, [[("1", [0, 24])]], 16)
    assert outcome.same_resolution and outcome.same_k_chi and outcome.same_verdict


def test_moderate_perturbation_keeps_k_and_chi(problems):
    problem = problems["primary"]
    outcome = perturbation_stable(problem.jet, problem.curve, [[("1", [13, 0])]], 16)
    assert outcome.same_k_chi


def test_arc_prefix_solves_secondary(analyzed, problems):
    _, res = analyzed("secondary")
    problem = problems["secondary"]
    prefix = arc_prefix(problem.jet, problem.curve, res, 4)
    assert prefix.length == 4
    assert all(t == ImmutableMatrix([0]) for t in compose_curve(problem.jet, prefix.curve, 7))
    for coef, nc, ker in zip(prefix.coefficients, prefix.nc_parts, prefix.kernel_parts):
        assert nc + ker == coef


def test_arc_prefix_matches_primary_puiseux_branch(analyzed, problems):
    # u = y³ 满足 u² − xu + x⁵ = 0，x = ε³ 时 y = ε⁴·C(ε⁹)^{1/3}
    _, res = analyzed("primary")
    problem = problems["primary"]
    prefix = arc_prefix(problem.jet, problem.curve, res, 1)
    t, eps = Symbol("t"), Symbol("eps")
    root = series(((1 - sqrt(1 - 4 * t)) / (2 * t)) ** Rational(1, 3), t, 0, 2).removeO()
    y = expand(eps ** 4 * root.subs(t, eps ** 9))
    assert y.coeff(eps, 13) == Rational(1, 3)
    z12 = prefix.coefficients[0]
    assert z12[0] == 0
    assert z12[1] == y.coeff(eps, 12) * factorial(12)
    assert z12 == ImmutableMatrix([0, 0])


def test_primary_report_is_fast(problems):
    problem = problems["primary"]
    start = time.perf_counter()
    report, _ = cone_report(problem.jet, problem.curve, 16)
    assert report.k == 11
    assert time.perf_counter() - start < 5


def test_arc_prefix_rejects_bad_input(analyzed, problems):
    _, res = analyzed("secondary")
    problem = problems["secondary"]
    with pytest.raises(IndexRangeError):
        arc_prefix(problem.jet, problem.curve, res, 0)
    with pytest.raises(IndexRangeError):
        arc_prefix(problem.jet, problem.curve, res, 2, q=[[1, 0]])


def test_arc_prefix_needs_transversal_resolution():
    jet = MapJet.from_terms(2, 2, [[("1", [1, 0])], []])
    curve = CurveJet.from_bar([[0, 1]])
    res = build_resolution(jet, curve, 1)
    with pytest.raises(NotTransversalError):
        arc_prefix(jet, curve, res, 2)
