"""Property-based checks for the pipeline's structural invariants."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from buttonsim import ActuationCurve, BSplineCurve, MovingAverage, error_metric, interpolate_at
from buttonsim.capture import GRID_STEP_MM, bin_index, grid_size
from buttonsim.spline import quantile_controls

forces = st.lists(st.floats(0.0, 400.0, allow_nan=False), min_size=2, max_size=80)


@given(forces, st.floats(0.0, 1.0))
def test_error_metric_nonnegative_and_symmetric(values, alpha):
    a = np.asarray(values)
    b = a[::-1].copy()
    assert error_metric(a, b, alpha) >= 0.0
    assert error_metric(a, b, alpha) == error_metric(b, a, alpha)
    assert error_metric(a, a, alpha) == 0.0


@given(
    st.floats(0.5, 6.2),
    st.lists(st.floats(0.0, 6.2), min_size=1, max_size=50),
)
def test_every_sample_maps_to_exactly_one_bin(travel, displacements):
    n = grid_size(travel)
    assert n == int(np.ceil(travel / GRID_STEP_MM - 1e-9))
    idx = bin_index(np.minimum(np.asarray(displacements), travel), travel)
    assert np.all((0 <= idx) & (idx < n))


@given(st.lists(st.floats(-100.0, 100.0), min_size=1, max_size=200), st.integers(1, 50))
def test_moving_average_bounded_by_stream_extremes(values, window):
    ma = MovingAverage(window)
    lo, hi = min(values), max(values)
    for v in values:
        out = ma.push(v)
        assert lo - 1e-9 <= out <= hi + 1e-9


@given(st.floats(20.0, 300.0), st.integers(4, 20))
@settings(max_examples=25)
def test_constant_spline_reproduces_any_level(level, k):
    curve = BSplineCurve(quantile_controls(4.0, k), np.full(k, level))
    grid = np.arange(grid_size(4.0)) * GRID_STEP_MM
    assert np.allclose(curve.evaluate(grid), level, atol=1e-9)


@given(st.floats(50.0, 200.0))
@settings(max_examples=50)
def test_interpolation_stays_within_bracketing_curves(velocity):
    n = grid_size(4.0)
    rng = np.random.default_rng(0)
    lo = ActuationCurve(50.0, 4.0, rng.uniform(10, 100, n))
    hi = ActuationCurve(200.0, 4.0, lo.u + rng.uniform(0, 50, n))
    out = interpolate_at([lo, hi], velocity)
    assert np.all(out.u >= lo.u - 1e-9)
    assert np.all(out.u <= hi.u + 1e-9)
