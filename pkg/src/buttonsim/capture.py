"""Capture-file ingestion: parsing, stream sync, filtering, and press gridding.

A capture holds two sensor streams: a microcontroller stream (force + sound at
a nominal 1 kHz) and a motion stream (two keycap markers at a nominal 256 Hz),
plus one sync keyframe pair. Ingestion reduces a capture to per-press force
profiles indexed on a fixed 50 um displacement grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import ParseError, SyncError, ValidationError

GRID_STEP_MM = 0.05
# Presses whose peak stays more than this below the travel range never
# bottomed out and are excluded from averaging.
INCOMPLETE_MARGIN_MM = 0.1


def grid_size(travel_range_mm: float) -> int:
    """Number of 50 um bins covering [0, travel_range)."""
    return int(np.ceil(travel_range_mm / GRID_STEP_MM - 1e-9))


def grid_displacements(travel_range_mm: float) -> np.ndarray:
    """Left-edge displacement of every bin."""
    return np.arange(grid_size(travel_range_mm)) * GRID_STEP_MM


def bin_index(displacement_mm: float | np.ndarray, travel_range_mm: float):
    """Map displacement(s) to bin indices; the bottom sample lands in the last bin."""
    n = grid_size(travel_range_mm)
    idx = np.floor(np.asarray(displacement_mm) / GRID_STEP_MM + 1e-9).astype(int)
    return np.clip(idx, 0, n - 1)


@dataclass(frozen=True)
class CaptureMeta:
    button_id: str
    nominal_velocity_mm_s: float
    travel_range_mm: float


@dataclass(frozen=True)
class CaptureSession:
    """Raw dual-stream recording with one sync keyframe pair.

    mcu: (n, 3) array of [t_ms, force_cN, sound_adc]
    mocap: (m, 7) array of [t_ms, x1, y1, z1, x2, y2, z2]
    sync: (mcu_t_ms, mocap_t_ms)
    """

    meta: CaptureMeta
    mcu: np.ndarray
    mocap: np.ndarray
    sync: tuple[float, float]


@dataclass(frozen=True)
class SyncedTrace:
    """Force/sound/displacement merged onto a uniform 1 ms timeline."""

    t_ms: np.ndarray
    force_cN: np.ndarray
    sound: np.ndarray
    displacement_mm: np.ndarray
    origin_displacement_mm: float


@dataclass
class PressSegment:
    """One stroke reduced to the 50 um displacement grid."""

    velocity_nominal_mm_s: float
    travel_range_mm: float
    force_cN: np.ndarray
    sound: np.ndarray
    complete: bool
    start_t_ms: float = 0.0
    stroke: str = "press"

    @property
    def grid_mm(self) -> np.ndarray:
        return grid_displacements(self.travel_range_mm)

    def __post_init__(self):
        n = grid_size(self.travel_range_mm)
        self.force_cN = np.asarray(self.force_cN, dtype=float)
        self.sound = np.asarray(self.sound, dtype=float)
        if self.force_cN.shape != (n,) or self.sound.shape != (n,):
            raise ValidationError(
                f"segment arrays must have {n} bins for travel {self.travel_range_mm} mm"
            )


def _require(payload: dict, key: str, where: str):
    if key not in payload:
        raise ParseError(f"{where}: missing required key '{key}'")
    return payload[key]


def _check_monotonic(t: np.ndarray, stream: str) -> None:
    if t.size >= 2 and not np.all(np.diff(t) > 0):
        bad = int(np.argmin(np.diff(t) > 0))
        raise ValidationError(
            f"{stream} timestamps not strictly increasing at record {bad + 1} "
            f"(t={t[bad + 1]:g} after t={t[bad]:g})"
        )


def parse_capture(data: bytes | str) -> CaptureSession:
    """Decode a capture file and validate its invariants."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"capture file is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError("capture file: top level must be an object")

    meta_raw = _require(payload, "meta", "capture file")
    meta = CaptureMeta(
        button_id=str(_require(meta_raw, "button_id", "meta")),
        nominal_velocity_mm_s=float(_require(meta_raw, "nominal_velocity_mm_s", "meta")),
        travel_range_mm=float(_require(meta_raw, "travel_range_mm", "meta")),
    )
    if meta.nominal_velocity_mm_s <= 0:
        raise ValidationError("meta.nominal_velocity_mm_s must be positive")
    if meta.travel_range_mm <= 0:
        raise ValidationError("meta.travel_range_mm must be positive")

    def load_stream(key: str, width: int) -> np.ndarray:
        rows = _require(payload, key, "capture file")
        try:
            arr = np.asarray(rows, dtype=float)
        except (ValueError, TypeError):
            arr = None
        if arr is None or arr.ndim != 2 or arr.shape[1] != width:
            bad = next(
                (i for i, r in enumerate(rows) if not hasattr(r, "__len__") or len(r) != width),
                0,
            )
            raise ParseError(f"{key} record {bad}: expected {width} numbers")
        if not np.all(np.isfinite(arr)):
            bad = int(np.argwhere(~np.isfinite(arr))[0][0])
            raise ParseError(f"{key} record {bad}: non-finite value")
        return arr

    mcu = load_stream("mcu", 3)
    mocap = load_stream("mocap", 7)
    if mcu.shape[0] < 2 or mocap.shape[0] < 2:
        raise ValidationError("each stream needs at least 2 samples")
    _check_monotonic(mcu[:, 0], "mcu")
    _check_monotonic(mocap[:, 0], "mocap")

    sync_raw = _require(payload, "sync", "capture file")
    sync = (
        float(_require(sync_raw, "mcu_t_ms", "sync")),
        float(_require(sync_raw, "mocap_t_ms", "sync")),
    )
    if not (mcu[0, 0] <= sync[0] <= mcu[-1, 0]):
        raise ValidationError(f"sync mcu_t_ms {sync[0]:g} outside mcu span")
    if not (mocap[0, 0] <= sync[1] <= mocap[-1, 0]):
        raise ValidationError(f"sync mocap_t_ms {sync[1]:g} outside mocap span")

    return CaptureSession(meta=meta, mcu=mcu, mocap=mocap, sync=sync)


def serialize_capture(session: CaptureSession) -> bytes:
    """Inverse of parse_capture; stable byte output for identical sessions."""
    payload = {
        "meta": {
            "button_id": session.meta.button_id,
            "nominal_velocity_mm_s": session.meta.nominal_velocity_mm_s,
            "travel_range_mm": session.meta.travel_range_mm,
        },
        "mcu": session.mcu.tolist(),
        "mocap": session.mocap.tolist(),
        "sync": {"mcu_t_ms": session.sync[0], "mocap_t_ms": session.sync[1]},
    }
    return json.dumps(payload, separators=(",", ":")).encode("utf-8")


def synchronize(session: CaptureSession) -> SyncedTrace:
    """Merge both streams onto the 1 kHz timeline.

    Motion timestamps are shifted so the sync keyframes coincide, the marker
    midpoint depth is linearly interpolated onto a uniform 1 ms grid, and
    displacement is measured downward from the resting keycap height.
    """
    mcu_t = session.mcu[:, 0]
    # Shift mocap time onto the mcu clock.
    offset = session.sync[0] - session.sync[1]
    mocap_t = session.mocap[:, 0] + offset
    depth = 0.5 * (session.mocap[:, 3] + session.mocap[:, 6])  # marker midpoint z

    t0 = max(mcu_t[0], mocap_t[0])
    t1 = min(mcu_t[-1], mocap_t[-1])
    if t1 - t0 < 1.0:
        raise SyncError(
            f"streams overlap for {t1 - t0:g} ms after sync shift; cannot synchronize"
        )
    t = np.arange(np.ceil(t0), np.floor(t1) + 0.5, 1.0)

    force = np.interp(t, mcu_t, session.mcu[:, 1])
    sound = np.interp(t, mcu_t, session.mcu[:, 2])
    z = np.interp(t, mocap_t, depth)
    origin = float(np.max(z))  # resting keycap height
    displacement = np.maximum(origin - z, 0.0)

    return SyncedTrace(
        t_ms=t,
        force_cN=force,
        sound=sound,
        displacement_mm=displacement,
        origin_displacement_mm=origin,
    )


def _sigma_samples(sigma_mm: float, displacement: np.ndarray) -> float:
    """Convert a displacement-domain sigma to samples via mean press speed.

    The trace is time-indexed, so a spatial sigma maps to
    sigma_mm / (mean speed in mm/ms); clamped to [1, 200] samples. Rest and
    hold phases would drag the mean toward zero, so only moving samples
    (> 5 mm/s) count.
    """
    if displacement.size < 2:
        return 1.0
    steps = np.abs(np.diff(displacement))  # mm per 1 ms sample
    moving = steps[steps > 0.005]
    speed = float(np.mean(moving)) if moving.size else 0.0
    if speed <= 0:
        return 200.0
    return float(np.clip(sigma_mm / speed, 1.0, 200.0))


def _gaussian_smooth(data: np.ndarray, sigma_samples: float, mode: str) -> np.ndarray:
    """Gaussian filter with optional slope-extrapolated edges.

    mode="linear" extends each end along its local trend before filtering, so
    constants and ramps pass through unbiased; other modes go straight to the
    underlying filter.
    """
    if mode != "linear":
        return gaussian_filter1d(data, sigma_samples, mode=mode)
    pad = int(np.ceil(4 * sigma_samples))
    fit_n = max(min(int(np.ceil(sigma_samples)), len(data)), 2)
    left = np.polyfit(np.arange(fit_n), data[:fit_n], 1)
    right = np.polyfit(np.arange(fit_n), data[-fit_n:], 1)
    head = np.polyval(left, np.arange(-pad, 0))
    tail = np.polyval(right, np.arange(fit_n, fit_n + pad))
    padded = np.concatenate([head, data, tail])
    return gaussian_filter1d(padded, sigma_samples, mode="nearest")[pad : pad + len(data)]


def filter_trace(
    trace: SyncedTrace,
    sigma_force_mm: float = 1.2,
    sigma_disp_mm: float = 1.2,
    mode: str = "linear",
) -> SyncedTrace:
    """Gaussian-smooth force and displacement (sigmas given in mm)."""
    if sigma_force_mm <= 0 or sigma_disp_mm <= 0:
        raise ValidationError("filter sigma must be positive")
    s_force = _sigma_samples(sigma_force_mm, trace.displacement_mm)
    s_disp = _sigma_samples(sigma_disp_mm, trace.displacement_mm)
    return replace(
        trace,
        force_cN=_gaussian_smooth(trace.force_cN, s_force, mode),
        displacement_mm=np.maximum(
            _gaussian_smooth(trace.displacement_mm, s_disp, mode), 0.0
        ),
    )


def _press_spans(displacement: np.ndarray, start_eps_mm: float) -> list[tuple[int, int]]:
    """Index spans where displacement leaves ~0 and returns to ~0."""
    active = displacement > start_eps_mm
    spans = []
    start = None
    for i, a in enumerate(active):
        if a and start is None:
            start = i
        elif not a and start is not None:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, len(active)))
    return spans


def _grid_samples(
    disp: np.ndarray, values: np.ndarray, travel_range_mm: float
) -> np.ndarray:
    """Average samples per 50 um bin; interpolate bins without samples."""
    n = grid_size(travel_range_mm)
    idx = bin_index(disp, travel_range_mm)
    sums = np.bincount(idx, weights=values, minlength=n)
    counts = np.bincount(idx, minlength=n)
    out = np.full(n, np.nan)
    hit = counts > 0
    out[hit] = sums[hit] / counts[hit]
    if not np.any(hit):
        return np.zeros(n)
    grid = grid_displacements(travel_range_mm)
    out[~hit] = np.interp(grid[~hit], grid[hit], out[hit])
    return out


def segment_and_grid(
    trace: SyncedTrace,
    travel_range_mm: float,
    velocity_nominal_mm_s: float,
    start_eps_mm: float = 0.02,
    include_release: bool = False,
) -> list[PressSegment]:
    """Detect presses in a filtered trace and grid each downstroke.

    Presses that never came within INCOMPLETE_MARGIN_MM of the travel range are
    flagged complete=False. With include_release=True a second segment per
    press is produced from the upstroke samples.
    """
    segments: list[PressSegment] = []
    for lo, hi in _press_spans(trace.displacement_mm, start_eps_mm):
        disp = trace.displacement_mm[lo:hi]
        if disp.size < 2:
            continue
        peak = int(np.argmax(disp))
        complete = bool(disp[peak] >= travel_range_mm - INCOMPLETE_MARGIN_MM)
        down = slice(0, peak + 1)
        segments.append(
            PressSegment(
                velocity_nominal_mm_s=velocity_nominal_mm_s,
                travel_range_mm=travel_range_mm,
                force_cN=_grid_samples(disp[down], trace.force_cN[lo:hi][down], travel_range_mm),
                sound=_grid_samples(disp[down], trace.sound[lo:hi][down], travel_range_mm),
                complete=complete,
                start_t_ms=float(trace.t_ms[lo]),
            )
        )
        if include_release and peak + 1 < disp.size:
            up = slice(peak, disp.size)
            segments.append(
                PressSegment(
                    velocity_nominal_mm_s=velocity_nominal_mm_s,
                    travel_range_mm=travel_range_mm,
                    force_cN=_grid_samples(disp[up], trace.force_cN[lo:hi][up], travel_range_mm),
                    sound=_grid_samples(disp[up], trace.sound[lo:hi][up], travel_range_mm),
                    complete=complete,
                    start_t_ms=float(trace.t_ms[lo + peak]),
                    stroke="release",
                )
            )
    return segments


def smooth_over_grid(values: np.ndarray, sigma_mm: float, mode: str = "linear") -> np.ndarray:
    """Gaussian smoothing of a gridded signal; sigma in mm over displacement.

    The default edge handling extends each end along its local slope before
    filtering, so affine trends pass through unbiased; other modes are passed
    to the underlying filter.
    """
    if sigma_mm <= 0:
        raise ValidationError("smoothing sigma must be positive")
    return _gaussian_smooth(np.asarray(values, dtype=float), sigma_mm / GRID_STEP_MM, mode)


def average_presses(segments: list[PressSegment], sigma_smooth_mm: float = 0.8) -> PressSegment:
    """Mean force per bin over complete segments, then smoothed over displacement.

    The sound channel is carried from the first complete segment rather than
    averaged: burst timing differs across presses and averaging would blur it.
    """
    complete = [s for s in segments if s.complete]
    if not complete:
        raise ValidationError("need at least one complete press to average")
    velocities = {s.velocity_nominal_mm_s for s in complete}
    if len(velocities) > 1:
        raise ValidationError(f"mixed nominal velocities in average: {sorted(velocities)}")
    travels = {s.travel_range_mm for s in complete}
    if len(travels) > 1:
        raise ValidationError(f"mixed travel ranges in average: {sorted(travels)}")
    strokes = {s.stroke for s in complete}
    if len(strokes) > 1:
        raise ValidationError("cannot average press and release strokes together")

    # Sorting per bin before summing makes the mean exactly order-independent.
    stacked = np.sort(np.stack([s.force_cN for s in complete]), axis=0)
    forces = stacked.mean(axis=0)
    return PressSegment(
        velocity_nominal_mm_s=complete[0].velocity_nominal_mm_s,
        travel_range_mm=complete[0].travel_range_mm,
        force_cN=smooth_over_grid(forces, sigma_smooth_mm),
        sound=complete[0].sound.copy(),
        complete=True,
        stroke=complete[0].stroke,
    )
