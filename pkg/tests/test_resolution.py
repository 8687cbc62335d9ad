import pytest
from sympy import ImmutableMatrix, Rational

from core.errors import IndexRangeError
from core.linalg import Subspace
from core.multijet import CurveJet, MapJet
from core.resolution import ResolutionBuilder, build_resolution, cone_operators, lemma_checks
from core.schemes import SCHEMES


def col(*xs):
    return ImmutableMatrix(list(xs))


def test_pitchfork_levels(analyzed):
    _, res = analyzed("pitchfork")
    assert res.k == 1
    first, second = res.level(1), res.level(2)
    assert first.sbar == ImmutableMatrix([[0, 0]])
    assert first.kernel_complement.dim == 0
    assert second.sbar == ImmutableMatrix([[2, 0]])
    assert second.kernel.same_as(Subspace.span(2, [col(0, 1)]))
    assert second.kernel_complement.contains(col(1, 0))
    assert res.transversal
    assert res.p_space.dim == 0
    assert res.l_hat[:, 2:] == ImmutableMatrix([[Rational(1, 2), 0]])


def test_pitchfork_cone_operators(analyzed):
    _, res = analyzed("pitchfork")
    ops = cone_operators(res)
    assert ops.bijective
    assert ops.weights(Rational(1, 2)) == [Rational(1, 48), Rational(1, 8)]
    a_eps = ops.a_eps(2)
    assert a_eps.shape == (2, 4)


@pytest.mark.parametrize("name", ["pitchfork", "secondary", "node"])
def test_lemmas_hold_on_bundled_problems(analyzed, name):
    _, res = analyzed(name)
    report = lemma_checks(res)
    assert report.passed
    assert report.curve_in_kernel is not None and report.curve_in_kernel.passed


def test_curve_lemma_skipped_without_approximation(analyzed):
    _, res = analyzed("regular")
    assert res.avoid_dropped
    assert lemma_checks(res).curve_in_kernel is None


def test_result_depends_only_on_low_order_data(problems):
    problem = problems["pitchfork"]
    longer = CurveJet.from_bar(list(problem.curve.bars(1)) + [col(5, 7)])
    assert build_resolution(problem.jet, problem.curve, 1) == build_resolution(problem.jet, longer, 1)


def test_builder_rejects_small_k(problems):
    builder = ResolutionBuilder(problems["primary"].jet, problems["primary"].curve)
    with pytest.raises(IndexRangeError):
        builder.result(2)
    with pytest.raises(IndexRangeError):
        builder.result(0)


def test_corrupted_scheme_entry_breaks_shift_identity():
    jet = MapJet.from_terms(2, 2, [[("1", [1, 0]), ("1", [0, 2])], [("1", [1, 1]), ("1", [0, 2])]])
    res = build_resolution(jet, CurveJet.from_bar([[0, 1]]), 2)
    assert lemma_checks(res).scheme_shift.passed
    with SCHEMES.corrupted(5, 3, 2):
        report = lemma_checks(res)
        assert not report.scheme_shift.passed
        assert not report.passed
    assert lemma_checks(res).scheme_shift.passed
