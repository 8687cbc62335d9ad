import io
import threading

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st
from sympy import ImmutableMatrix, Rational

from core import continuation
from core.analysis import cone_report, degree_signs
from core.config_manager import ConfigManager
from core.errors import ApproximationError, ConeExitError, DimensionError, NewtonDivergence
from core.continuation import (ContinuationSettings, PointStatus, TraceRow, TraceTable, cone_point,
                               corollary_check, empty_cone_probe, fit_slope, identity_order_check,
                               level_set, level_set_point, newton_continue, newton_solve, rate_trace,
                               remainder_H)
from core.multijet import EXACT, MapJet, eval_map
from core.resolution import build_resolution


def zeros():
    return ImmutableMatrix([0, 0])


@pytest.fixture(scope="module")
def broken(problems):
    """λy − y³ + y²：沿同一曲线没有 2k 阶逼近"""
    jet = MapJet.from_terms(2, 1, [[("1", [1, 1]), ("-1", [0, 3]), ("1", [0, 2])]])
    return build_resolution(jet, problems["pitchfork"].curve, 1)


def test_settings_grid_is_strictly_decreasing():
    conf = ContinuationSettings(eps_max=0.2, eps_min=0.02, points=5)
    grid = conf.grid()
    assert grid[0] == pytest.approx(0.2) and grid[-1] == pytest.approx(0.02)
    assert all(a > b for a, b in zip(grid, grid[1:]))
    assert conf.grid(-1) == [-e for e in grid]
    assert len(conf.signed_grids()) == 2
    with pytest.raises(DimensionError):
        conf.with_grid(0.01, 0.1, 5)
    with pytest.raises(DimensionError):
        conf.with_grid(0.1, 0.01, 1)


def test_cone_point_exact_and_float(analyzed):
    _, res = analyzed("pitchfork")
    blocks = [zeros(), ImmutableMatrix([1, 0])]
    exact = cone_point(res, Rational(1, 2), blocks, mode=EXACT)
    assert exact == ImmutableMatrix([Rational(3, 8), Rational(1, 2)])
    np.testing.assert_allclose(cone_point(res, 0.5, [[0, 0], [1, 0]]), [0.375, 0.5])


def test_cone_point_rejects_blocks_outside_complements(analyzed):
    _, res = analyzed("pitchfork")
    with pytest.raises(DimensionError):
        cone_point(res, 0.5, [[0, 0], [0, 1]])
    with pytest.raises(DimensionError):
        cone_point(res, 0.5, [[0, 0]])


@hyp_settings(max_examples=20, deadline=None)
@given(num=st.integers(min_value=-20, max_value=20), den=st.integers(min_value=1, max_value=20))
def test_cone_point_with_zero_blocks_is_the_curve(analyzed, num, den):
    _, res = analyzed("pitchfork")
    eps = Rational(num, den)
    assert cone_point(res, eps, [zeros(), zeros()], mode=EXACT) == res.curve.point(eps)


def test_remainder_is_continuous_at_zero(analyzed):
    _, res = analyzed("pitchfork")
    blocks = [zeros(), ImmutableMatrix([2, 0])]
    assert remainder_H(res, 0, blocks)[0] == pytest.approx(1.0)
    assert remainder_H(res, Rational(1, 2), blocks)[0] == pytest.approx(1.0)
    assert remainder_H(res, 1e-3, blocks)[0] == pytest.approx(1.0)


def test_remainder_requires_approximation(broken):
    with pytest.raises(ApproximationError):
        remainder_H(broken, 0.1, [zeros(), zeros()])


def test_newton_solve_converges_and_fails():
    conf = ContinuationSettings()
    result = newton_solve(lambda x: x ** 2 - 4, lambda x: np.array([[2 * x[0]]]), np.array([1.0]), conf)
    assert result.coords[0] == pytest.approx(2.0)
    with pytest.raises(NewtonDivergence) as info:
        newton_solve(lambda x: x ** 2 + 1, lambda x: np.array([[2 * x[0]]]), np.array([0.0]), conf, eps=0.5)
    assert info.value.eps == 0.5
    with pytest.raises(ConeExitError):
        newton_solve(lambda x: x - 1e7, lambda x: np.eye(1), np.array([0.0]), conf)


def test_newton_continue_on_exact_branch(analyzed, fast_settings):
    _, res = analyzed("pitchfork")
    grid = [e for half in fast_settings.signed_grids() for e in half]
    curve = newton_continue(res, grid, settings=fast_settings)
    assert len(curve.converged) == len(grid)
    for pt in curve.points:
        assert pt.status is PointStatus.CONVERGED
        assert pt.iterations == 0
        assert pt.residual_g == 0
        np.testing.assert_allclose(pt.point, [pt.eps ** 2, pt.eps])
    assert curve.identity is not None and curve.identity.accept
    signs = degree_signs(res, curve.samples())
    assert signs.positive == 1 and signs.negative == -1 and signs.differ


def test_newton_continue_without_approximation(broken, fast_settings):
    with pytest.raises(ApproximationError):
        newton_continue(broken, fast_settings.grid(), settings=fast_settings)


def test_identity_order_check_synthetic():
    eps = np.geomspace(0.1, 1e-3, 10)
    good = identity_order_check(eps, [e ** 2 * np.array([1.0, 2.0]) for e in eps], k=1)
    assert good.accept
    bad = identity_order_check(eps, [e * np.array([1.0, 0.0]) for e in eps], k=1)
    assert not bad.accept
    assert bad.max_abs == pytest.approx(1.0, rel=1e-4)


def test_fit_slope():
    conf = ContinuationSettings()
    eps = np.geomspace(0.1, 1e-3, 9)
    fit = fit_slope("q", eps, 3 * eps ** 2, conf, expected=2)
    assert fit.accept and fit.nearest == 2 and fit.matches_expected
    assert fit.slope == pytest.approx(2.0)
    zero = fit_slope("z", eps, np.zeros_like(eps), conf, expected=4, at_least=True)
    assert zero.exact_zero and zero.matches_expected
    few = fit_slope("f", eps[:2], eps[:2], conf)
    assert not few.accept


def test_pitchfork_rate_laws(analyzed, fast_settings):
    _, res = analyzed("pitchfork")
    result = rate_trace(res, settings=fast_settings)
    assert result.fits["abs_det"].nearest == 1 and result.fits["abs_det"].matches_expected
    assert result.fits["inv_norm"].nearest == -1 and result.fits["inv_norm"].matches_expected
    assert result.fits["lin_residual"].exact_zero
    assert result.fits["dnorm_2"].nearest == 1
    assert "dnorm_1" not in result.fits
    assert np.all(result.table.column("residual") == 0)
    np.testing.assert_allclose(result.table.column("abs_det"), result.table.column("eps"))


def test_secondary_rate_laws(analyzed, fast_settings):
    _, res = analyzed("secondary")
    result = rate_trace(res, settings=fast_settings, with_solutions=False)
    assert result.fits["abs_det"].nearest == 3 and result.fits["abs_det"].accept
    assert result.fits["abs_det"].slope == pytest.approx(3, abs=0.05)
    assert result.fits["inv_norm"].slope == pytest.approx(-3, abs=0.05)
    assert result.fits["lin_residual"].slope >= 8 - fast_settings.slope_tol
    assert result.curve is None


def test_primary_determinant_slope(analyzed):
    _, res = analyzed("primary")
    conf = ContinuationSettings(points=9).with_grid(0.2, 0.02, 9)
    result = rate_trace(res, settings=conf, with_solutions=False)
    assert result.fits["abs_det"].expected == 11
    assert result.fits["abs_det"].slope == pytest.approx(11, abs=0.05)
    assert result.fits["inv_norm"].slope == pytest.approx(-11, abs=0.05)
    assert result.fits["inv_norm"].matches_expected


def test_trace_csv_layout():
    table = TraceTable(k=1, rows=[TraceRow(0.1, 0.0, 0.1, 10.0, (float("nan"), 0.2), 0.0)], grid_note="grid 0.1:0.1:1")
    out = io.StringIO()
    table.write_csv(out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "# grid 0.1:0.1:1"
    assert lines[1] == "eps,residual,abs_det,inv_norm,dnorm_1,dnorm_2,lin_residual"
    assert lines[2].split(",")[0] == "0.10000000000000001"
    assert lines[2].split(",")[4] == "nan"


def test_level_set_coordinate(analyzed):
    _, res = analyzed("pitchfork")
    n_top = [0, Rational(1, 2)]
    coords = level_set(res, 0.1, n_top, ContinuationSettings())
    assert coords[0] == pytest.approx(0.10125, rel=1e-10)
    point = level_set_point(res, 0.1, coords, n_top)
    assert eval_map(res.jet, point, "float")[0] == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DimensionError):
        level_set(res, 0.1, [1, 0])
    with pytest.raises(DimensionError):
        level_set(res, 0, n_top)


def test_corollary_on_pitchfork(analyzed, fast_settings):
    _, res = analyzed("pitchfork")
    report = corollary_check(res, settings=fast_settings)
    assert report.accept
    assert report.tangent_fit.nearest == 1


def test_empty_cone_probe(broken, fast_settings):
    report = empty_cone_probe(broken, settings=fast_settings)
    assert all(report.converged)
    assert report.norm_fit.nearest == -1
    assert report.empty
    assert report.norms[-1] == pytest.approx(2 / fast_settings.eps_min, rel=1e-8)


def test_probe_finds_bounded_solutions(analyzed, fast_settings):
    _, res = analyzed("pitchfork")
    report = empty_cone_probe(res, settings=fast_settings)
    assert not report.empty


@pytest.fixture
def primary_settings(problems):
    return ContinuationSettings.from_config(ConfigManager().with_overrides(problems["primary"].config_overrides))


def test_primary_branch_stays_inside_the_box(analyzed, primary_settings):
    _, res = analyzed("primary")
    curve = newton_continue(res, [0.1, 0.05, -0.1], settings=primary_settings)
    for pt in curve.points:
        assert pt.status is PointStatus.CONVERGED
        assert pt.residual_g < 1e-12
    assert curve.to_dict()["max_iterations"] >= 1
    at = {pt.eps: pt.point for pt in curve.points}
    np.testing.assert_allclose(at[0.1], [1e-3, 1e-4], rtol=1e-9)


def test_primary_branch_survives_degree_24_term(problems, primary_settings):
    problem = problems["primary"]
    _, res = cone_report(problem.jet.add_terms([[("1", [0, 24])]]), problem.curve, 16)
    curve = newton_continue(res, [0.1, 0.05, -0.1], settings=primary_settings)
    assert all(pt.status is PointStatus.CONVERGED for pt in curve.points)
    assert max(pt.residual_g for pt in curve.points) < 1e-12


def test_scaled_displacement_ignores_factorial_weights(analyzed):
    _, res = analyzed("pitchfork")
    blown = continuation.BlownUpMap(res)
    coords = np.ones(blown.dim)
    # ε → 0 时连续
    assert blown.scaled_displacement(1e-12, coords) == pytest.approx(blown.scaled_displacement(0, coords), abs=1e-6)
    assert blown.scaled_displacement(-1e-12, coords) == pytest.approx(blown.scaled_displacement(0, coords), abs=1e-6)
    assert blown.scaled_displacement(0.1, np.zeros(blown.dim)) == 0


def test_grid_points_do_not_depend_on_the_path(analyzed, primary_settings):
    _, res = analyzed("primary")
    direct = newton_continue(res, [0.05], settings=primary_settings)
    stepped = newton_continue(res, [0.1, 0.08, 0.065, 0.05], settings=primary_settings)
    last = next(pt for pt in stepped.points if pt.eps == 0.05)
    np.testing.assert_allclose(direct.points[0].point, last.point, rtol=0, atol=1e-10)


def _fail_in_workers(original):
    def wrapped(*args, **kwargs):
        if threading.current_thread() is not threading.main_thread():
            raise np.linalg.LinAlgError("Singular matrix")
        return original(*args, **kwargs)
    return wrapped


def test_worker_errors_mark_points_diverged(analyzed, fast_settings, monkeypatch):
    _, res = analyzed("pitchfork")
    monkeypatch.setattr(continuation, "eval_map", _fail_in_workers(continuation.eval_map))
    curve = newton_continue(res, [0.1, 0.05, 0.02], settings=fast_settings, strict=False)
    for pt in curve.points:
        assert pt.status is PointStatus.DIVERGED
        assert isinstance(pt.error, NewtonDivergence)
        assert isinstance(pt.error.__cause__, np.linalg.LinAlgError)
    with pytest.raises(NewtonDivergence):
        newton_continue(res, [0.1, 0.05], settings=fast_settings)


def test_identity_fit_uses_the_solution_points(analyzed, fast_settings):
    _, res = analyzed("pitchfork")
    curve = newton_continue(res, fast_settings.grid(), settings=fast_settings)
    assert curve.identity.accept
    for pt in curve.points:
        pt.point = pt.point + np.array([pt.eps ** res.k, 0.0])
    shifted = curve.identity_fit(res.curve)
    assert not shifted.accept
    assert shifted.max_abs == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("name", ["pitchfork", "secondary"])
def test_level_set_through_the_centre_line_is_zero(analyzed, name):
    _, res = analyzed(name)
    coords = level_set(res, 0.1, np.zeros(res.n), ContinuationSettings())
    assert np.all(coords == 0)
