"""Actuation curves: per-velocity command-vs-displacement tables, run
averaging, and velocity interpolation into denser curve sets."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .capture import GRID_STEP_MM, grid_displacements, grid_size, smooth_over_grid
from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class ActuationCurve:
    velocity_mm_s: float
    travel_range_mm: float
    u: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.u, dtype=float)
        object.__setattr__(self, "u", arr)
        n = grid_size(self.travel_range_mm)
        if arr.shape != (n,):
            raise ValidationError(
                f"actuation curve needs {n} bins for travel {self.travel_range_mm:g} mm"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("actuation values must be finite")

    @property
    def grid_mm(self) -> np.ndarray:
        return grid_displacements(self.travel_range_mm)


@dataclass
class ActuationTable:
    button_id: str
    plant_id: str
    curves: list[ActuationCurve]
    interpolated: bool = False

    @property
    def travel_range_mm(self) -> float:
        return self.curves[0].travel_range_mm

    def sorted_curves(self) -> list[ActuationCurve]:
        return sorted(self.curves, key=lambda c: c.velocity_mm_s)


def _check_same_grid(curves: list[ActuationCurve]) -> None:
    travels = {c.travel_range_mm for c in curves}
    if len(travels) > 1:
        raise ValidationError(f"curves use different travel ranges: {sorted(travels)}")


def finalize_actuation(runs: list[ActuationCurve], sigma_mm: float = 1.2) -> ActuationCurve:
    """Per-bin mean over repeated compensation runs, then displacement-domain
    Gaussian smoothing."""
    if not runs:
        raise ValidationError("need at least one run to finalize")
    _check_same_grid(runs)
    velocities = {r.velocity_mm_s for r in runs}
    if len(velocities) > 1:
        raise ValidationError(f"runs span multiple velocities: {sorted(velocities)}")
    mean_u = np.mean([r.u for r in runs], axis=0)
    return ActuationCurve(
        velocity_mm_s=runs[0].velocity_mm_s,
        travel_range_mm=runs[0].travel_range_mm,
        u=smooth_over_grid(mean_u, sigma_mm),
    )


def interpolate_at(curves: list[ActuationCurve], velocity_mm_s: float) -> ActuationCurve:
    """Per-bin linear interpolation in velocity; clamps outside the span.

    Queries at a measured velocity return that curve's values untouched.
    """
    if len(curves) < 2:
        raise ValidationError("velocity interpolation needs at least 2 curves")
    _check_same_grid(curves)
    ordered = sorted(curves, key=lambda c: c.velocity_mm_s)
    vs = [c.velocity_mm_s for c in ordered]
    for c in ordered:
        if c.velocity_mm_s == velocity_mm_s:
            return ActuationCurve(velocity_mm_s, c.travel_range_mm, c.u.copy())
    if velocity_mm_s <= vs[0]:
        return ActuationCurve(velocity_mm_s, ordered[0].travel_range_mm, ordered[0].u.copy())
    if velocity_mm_s >= vs[-1]:
        return ActuationCurve(velocity_mm_s, ordered[-1].travel_range_mm, ordered[-1].u.copy())
    hi_i = next(i for i, v in enumerate(vs) if v > velocity_mm_s)
    lo, hi = ordered[hi_i - 1], ordered[hi_i]
    w = (velocity_mm_s - lo.velocity_mm_s) / (hi.velocity_mm_s - lo.velocity_mm_s)
    return ActuationCurve(
        velocity_mm_s, lo.travel_range_mm, (1.0 - w) * lo.u + w * hi.u
    )


def interpolate_velocities(
    curves: list[ActuationCurve], target_count: int
) -> list[ActuationCurve]:
    """Evenly spaced curve set spanning the measured velocity range."""
    if len(curves) < 2:
        raise ValidationError("velocity interpolation needs at least 2 curves")
    vs = sorted(c.velocity_mm_s for c in curves)
    targets = np.linspace(vs[0], vs[-1], target_count)
    return [interpolate_at(curves, float(v)) for v in targets]


def table_to_dict(table: ActuationTable) -> dict:
    return {
        "button_id": table.button_id,
        "plant_id": table.plant_id,
        "curves": [
            {
                "velocity_mm_s": c.velocity_mm_s,
                "grid_mm": GRID_STEP_MM,
                "travel_range_mm": c.travel_range_mm,
                "u": c.u.tolist(),
            }
            for c in table.sorted_curves()
        ],
        "interpolated": table.interpolated,
    }


def table_from_dict(payload: dict) -> ActuationTable:
    try:
        curves = [
            ActuationCurve(
                velocity_mm_s=float(entry["velocity_mm_s"]),
                travel_range_mm=float(entry["travel_range_mm"]),
                u=np.asarray(entry["u"], dtype=float),
            )
            for entry in payload["curves"]
        ]
        return ActuationTable(
            button_id=str(payload["button_id"]),
            plant_id=str(payload.get("plant_id", "default")),
            curves=curves,
            interpolated=bool(payload.get("interpolated", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"actuation file missing or malformed field: {exc}") from exc


def serialize_table(table: ActuationTable) -> str:
    return json.dumps(table_to_dict(table))


def parse_table(data: str | bytes) -> ActuationTable:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"actuation file is not valid JSON: {exc}") from exc
    return table_from_dict(payload)
