import math

import numpy as np
import pytest
from scipy.interpolate import BSpline as ScipyBSpline

from buttonsim import BSplineCurve, DomainError, FitError, ValidationError, bic_star, fit_curve, select_order
from buttonsim.capture import PressSegment, grid_displacements, grid_size
from buttonsim.spline import basis_matrix, gaussian_log_likelihood, knots_from_controls, quantile_controls
from buttonsim.synthetic import spline_segment


def constant_segment(value=30.0, travel=4.0):
    n = grid_size(travel)
    return PressSegment(100.0, travel, np.full(n, value), np.zeros(n), True)


class TestEvalCurve:
    def test_constant_control_forces(self):
        xs = quantile_controls(4.0, 10)
        curve = BSplineCurve(xs, np.full(10, 50.0))
        for d in (0.0, 0.37, 2.0, 3.999, 4.0):
            assert curve.evaluate(d) == pytest.approx(50.0, abs=1e-12)

    def test_clamped_endpoints_interpolate(self):
        rng = np.random.default_rng(0)
        xs = quantile_controls(4.0, 8)
        ys = rng.uniform(20, 80, 8)
        curve = BSplineCurve(xs, ys)
        assert curve.evaluate(0.0) == pytest.approx(ys[0], abs=1e-12)
        assert curve.evaluate(4.0) == pytest.approx(ys[-1], abs=1e-12)

    def test_out_of_domain_raises(self):
        curve = BSplineCurve(quantile_controls(4.0, 5), np.ones(5))
        with pytest.raises(DomainError):
            curve.evaluate(-0.5)
        with pytest.raises(DomainError):
            curve.evaluate(4.5)

    def test_matches_independent_textbook_evaluator(self):
        # Independent oracle: scipy's reference B-spline evaluated on the same
        # knots and coefficients, on the 0.05 mm grid, within 1e-9.
        rng = np.random.default_rng(42)
        for trial in range(5):
            k = 15
            xs = quantile_controls(4.0, k)
            ys = rng.uniform(10, 120, k)
            curve = BSplineCurve(xs, ys)
            reference = ScipyBSpline(curve.knots, ys, curve.degree, extrapolate=False)
            grid = grid_displacements(4.0)
            ours = np.asarray(curve.evaluate(grid))
            theirs = reference(grid)
            theirs[np.isnan(theirs)] = ys[-1]  # scipy returns nan at the closed right end
            assert np.max(np.abs(ours - theirs)) < 1e-9

    def test_continuity(self):
        rng = np.random.default_rng(3)
        curve = BSplineCurve(quantile_controls(4.0, 12), rng.uniform(0, 100, 12))
        eps = 1e-6
        for d in np.linspace(eps, 4.0 - eps, 23):
            assert abs(curve.evaluate(d + eps) - curve.evaluate(d - eps)) < 1e-3

    def test_requires_enough_controls(self):
        with pytest.raises(ValidationError):
            BSplineCurve(np.array([0.0, 1.0, 2.0]), np.zeros(3), degree=3)

    def test_ordering_enforced(self):
        with pytest.raises(ValidationError):
            BSplineCurve(np.array([0.0, 2.0, 1.0, 3.0]), np.zeros(4), degree=3)


class TestFitCurve:
    def test_exact_recovery_of_generating_spline(self):
        segment, truth = spline_segment(seed=1, k_true=12, noise_cN=0.0, jitter_cN=5.0)
        curve, report = fit_curve(segment, 12)
        assert report.rmse_cN < 1e-6
        assert np.allclose(curve.control_y, truth.control_y, atol=1e-6)

    def test_constant_data_gives_constant_controls(self):
        for k in (4, 9, 15):
            curve, report = fit_curve(constant_segment(30.0), k)
            assert np.allclose(curve.control_y, 30.0, atol=1e-9)

    def test_rmse_scale_on_synthetic_button(self):
        segment, _ = spline_segment(seed=7, k_true=15, noise_cN=0.1)
        _, report = fit_curve(segment, 15)
        assert report.rmse_cN <= 0.2

    def test_k_too_large_rejected(self):
        with pytest.raises(FitError):
            fit_curve(constant_segment(), grid_size(4.0) + 1)

    def test_residual_orthogonality(self):
        # Normal-equations check: residuals orthogonal to every basis column.
        segment, _ = spline_segment(seed=5, k_true=15, noise_cN=0.5)
        curve, _ = fit_curve(segment, 11)
        B = basis_matrix(quantile_controls(4.0, 11), 3, segment.grid_mm)
        residual = segment.force_cN - B @ curve.control_y
        assert np.max(np.abs(B.T @ residual)) < 1e-6

    def test_report_internally_consistent(self):
        segment, _ = spline_segment(seed=9, noise_cN=0.2)
        _, report = fit_curve(segment, 15, penalty=2.5)
        recomputed = math.log(report.n) * report.k * 2.5 - 2 * report.log_likelihood
        assert report.bic_star == pytest.approx(recomputed, abs=1e-9)


class TestBicStar:
    def test_n_one_gives_zero(self):
        assert bic_star(1, 5, 0.0, 2.5) == 0.0

    def test_hand_computed_value(self):
        # ln(100) * 15 * 2.5 - 2 * (-50) = 272.694 (direct arithmetic oracle)
        value = bic_star(100, 15, -50.0, 2.5)
        assert value == pytest.approx(272.6938819745534, abs=1e-9)
        assert value == pytest.approx(math.log(100) * 15 * 2.5 + 100, abs=1e-12)

    def test_default_penalty_is_2_5(self):
        assert bic_star(100, 15, -50.0) == bic_star(100, 15, -50.0, 2.5)

    def test_penalty_monotone_in_k(self):
        values = [bic_star(200, k, -10.0) for k in range(1, 30)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_preconditions(self):
        with pytest.raises(ValidationError):
            bic_star(0, 1, 0.0)
        with pytest.raises(ValidationError):
            bic_star(10, 0, 0.0)


class TestSelectOrder:
    def test_known_8_point_generator_recovered(self):
        # Generator-recovery experiment: 20 seeds, >= 80% land in [6, 10].
        hits = 0
        for seed in range(20):
            segment, _ = spline_segment(seed=seed, k_true=8, noise_cN=0.15)
            best_k, _ = select_order(segment, (4, 30))
            hits += 6 <= best_k <= 10
        assert hits >= 16

    def test_noiseless_constant_picks_k_min(self):
        best_k, reports = select_order(constant_segment(30.0), (4, 20))
        assert best_k == 4
        assert reports[0].k == 4

    def test_fifteen_point_suite(self):
        # Six-button-style synthetic suite: selection should sit near 15.
        hits = 0
        for seed in range(10):
            segment, _ = spline_segment(seed=100 + seed, k_true=15, noise_cN=0.1)
            best_k, _ = select_order(segment, (4, 30), penalty=2.5)
            hits += 13 <= best_k <= 17
        assert hits >= 8

    def test_deterministic(self):
        segment, _ = spline_segment(seed=3, noise_cN=0.1)
        a = select_order(segment, (4, 25))
        b = select_order(segment, (4, 25))
        assert a[0] == b[0]
        assert [r.bic_star for r in a[1]] == [r.bic_star for r in b[1]]

    def test_empty_range_rejected(self):
        with pytest.raises(FitError):
            select_order(constant_segment(), (200, 300))


class TestLikelihood:
    def test_matches_closed_form(self):
        # -2 ln L = n ln(RSS/n) + n (1 + ln 2 pi)
        n, rss = 80, 12.5
        expected = -0.5 * (n * math.log(rss / n) + n * (1 + math.log(2 * math.pi)))
        assert gaussian_log_likelihood(n, rss) == pytest.approx(expected, abs=1e-12)

    def test_zero_rss_floored(self):
        assert math.isfinite(gaussian_log_likelihood(80, 0.0))
