"""Synthetic button data: parametric force curves, capture-file generation,
and seeded datasets for order-selection experiments.

Captures are generated band-limited (smooth trajectories plus low-pass-shaped
noise); the analog antialiasing stage of real hardware is not re-simulated.
"""

from __future__ import annotations

import numpy as np

from .capture import (
    CaptureMeta,
    CaptureSession,
    GRID_STEP_MM,
    PressSegment,
    grid_displacements,
    grid_size,
)
from .spline import BSplineCurve, quantile_controls

STANDARD_VELOCITIES = (50.0, 100.0, 150.0, 200.0)


def tactile_force_cN(
    d_mm: np.ndarray | float,
    travel_mm: float = 4.0,
    preload_cN: float = 24.0,
    stiffness_cN_mm: float = 7.0,
    bump_amp_cN: float = 3.5,
    bump_center_mm: float = 1.3,
    bump_std_mm: float = 1.1,
    wall_cN: float = 1.5,
    wall_scale_mm: float = 0.8,
) -> np.ndarray | float:
    """Gentle tactile force profile: preload + spring + snap bump + bottom wall.

    Default bump geometry is deliberately wide: the pipeline's final actuation
    smoothing (sigma 1.2 mm) must not erase it.
    """
    d = np.asarray(d_mm, dtype=float)
    force = (
        preload_cN
        + stiffness_cN_mm * d
        + bump_amp_cN * np.exp(-(((d - bump_center_mm) / bump_std_mm) ** 2))
        + wall_cN * np.exp((d - travel_mm) / wall_scale_mm)
    )
    return force if isinstance(d_mm, np.ndarray) else float(force)


def velocity_scaled_force(d_mm, velocity_mm_s: float, travel_mm: float = 4.0, **kwargs):
    """Damping flavor: faster presses meet slightly higher resistance."""
    scale = 1.0 + 8e-4 * (velocity_mm_s - 50.0)
    return tactile_force_cN(d_mm, travel_mm=travel_mm, **kwargs) * scale


def _minimum_jerk(depth_mm: float, n_ticks: int) -> np.ndarray:
    tau = np.arange(1, n_ticks + 1) / n_ticks
    return depth_mm * (10 * tau**3 - 15 * tau**4 + 6 * tau**5)


def _band_limited_noise(rng: np.random.Generator, n: int, sigma: float) -> np.ndarray:
    """White noise smoothed over ~3 samples, rescaled to the target sigma."""
    if sigma <= 0 or n == 0:
        return np.zeros(n)
    white = rng.normal(0.0, 1.0, n + 8)
    kernel = np.array([0.25, 0.5, 0.25])
    smooth = np.convolve(white, kernel, mode="same")[4 : 4 + n]
    return smooth / np.std(smooth) * sigma


def synthetic_capture(
    button_id: str = "synthetic-tactile",
    velocity_mm_s: float = 100.0,
    travel_mm: float = 4.0,
    presses: int = 15,
    seed: int = 0,
    force_noise_cN: float = 1.5,
    marker_noise_mm: float = 0.002,
    vibration_onset_mm: float = 2.4,
    vibration_frequency_hz: float = 239.0,
    vibration_duration_ms: float = 16.0,
    incomplete_presses: int = 0,
    sync_offset_ms: float = 40.0,
    **curve_kwargs,
) -> CaptureSession:
    """One capture session: repeated presses of the synthetic tactile button.

    Each press follows a minimum-jerk profile whose mean downstroke speed is
    the session's nominal velocity; the sound channel carries a decaying
    burst as the keycap passes the vibration onset.
    """
    rng = np.random.default_rng(seed)
    press_ms = max(int(round(travel_mm / velocity_mm_s * 1000.0)), 8)
    rest_ms, hold_ms = 120, 60

    blocks = [np.zeros(rest_ms)]
    for p in range(presses):
        depth = travel_mm if p >= incomplete_presses else travel_mm * 0.55
        down = _minimum_jerk(depth, press_ms)
        up = depth - _minimum_jerk(depth, press_ms)
        blocks += [down, np.full(hold_ms, depth), up, np.zeros(rest_ms)]
    displacement = np.concatenate(blocks)
    n = len(displacement)
    t_mcu = np.arange(n, dtype=float)

    force = np.asarray(
        velocity_scaled_force(displacement, velocity_mm_s, travel_mm=travel_mm, **curve_kwargs)
    )
    force[displacement <= 1e-9] = 0.0  # finger off the keycap
    force = force + _band_limited_noise(rng, n, force_noise_cN)

    sound = rng.normal(0.0, 1.0, n)
    crossings = np.where(
        (displacement[1:] >= vibration_onset_mm) & (displacement[:-1] < vibration_onset_mm)
    )[0]
    burst_len = int(vibration_duration_ms)
    for c in crossings:
        t_rel = np.arange(burst_len) / 1000.0
        envelope = 1.0 - t_rel / (vibration_duration_ms / 1000.0)
        burst = 60.0 * envelope * np.sin(2 * np.pi * vibration_frequency_hz * t_rel)
        end = min(c + 1 + burst_len, n)
        sound[c + 1 : end] += burst[: end - c - 1]

    # Motion stream at 256 Hz; keycap top rides 18 mm above the table.
    mocap_t = np.arange(0.0, n - 1, 1000.0 / 256.0)
    z = 18.0 - np.interp(mocap_t, t_mcu, displacement)
    z1 = z + rng.normal(0.0, marker_noise_mm, len(mocap_t))
    z2 = z + rng.normal(0.0, marker_noise_mm, len(mocap_t))
    mocap = np.column_stack(
        [
            mocap_t + sync_offset_ms,
            np.full(len(mocap_t), -6.0),
            np.full(len(mocap_t), 2.0),
            z1,
            np.full(len(mocap_t), 6.0),
            np.full(len(mocap_t), 2.0),
            z2,
        ]
    )
    mcu = np.column_stack([t_mcu, force, sound])
    return CaptureSession(
        meta=CaptureMeta(button_id, velocity_mm_s, travel_mm),
        mcu=mcu,
        mocap=mocap,
        sync=(10.0, 10.0 + sync_offset_ms),
    )


def spline_segment(
    seed: int,
    k_true: int = 15,
    travel_mm: float = 4.0,
    noise_cN: float = 0.1,
    velocity_mm_s: float = 100.0,
    jitter_cN: float = 3.0,
) -> tuple[PressSegment, BSplineCurve]:
    """Seeded segment drawn from a known spline: a commodity-button-flavored
    base shape plus per-control-point jitter, so every control point carries
    signal. Returns (noisy segment, generating curve)."""
    rng = np.random.default_rng(seed)
    xs = quantile_controls(travel_mm, k_true)
    base = 24.0 + 9.0 * xs
    bump = 22.0 * np.exp(-(((xs - rng.uniform(1.0, 1.6)) / 0.45) ** 2))
    controls = base + bump + rng.uniform(-jitter_cN, jitter_cN, k_true)
    curve = BSplineCurve(xs, controls)
    grid = grid_displacements(travel_mm)
    forces = np.asarray(curve.evaluate(grid)) + rng.normal(0.0, noise_cN, len(grid))
    segment = PressSegment(
        velocity_nominal_mm_s=velocity_mm_s,
        travel_range_mm=travel_mm,
        force_cN=forces,
        sound=np.zeros(len(grid)),
        complete=True,
    )
    return segment, curve


def segment_from_curve(values_fn, travel_mm: float, velocity_mm_s: float = 100.0) -> PressSegment:
    """Wrap an analytic force function into a gridded segment."""
    grid = grid_displacements(travel_mm)
    return PressSegment(
        velocity_nominal_mm_s=velocity_mm_s,
        travel_range_mm=travel_mm,
        force_cN=np.asarray(values_fn(grid), dtype=float),
        sound=np.zeros(grid_size(travel_mm)),
        complete=True,
    )
