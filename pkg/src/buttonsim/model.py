"""The editable button model: per-velocity spline force curves plus travel,
activation, and vibration annotations, with JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .capture import PressSegment, grid_displacements
from .errors import ParseError, ValidationError
from .spline import BSplineCurve, DEFAULT_PENALTY, FitReport, fit_curve, select_order
from .vibration import VibrationDescriptor


@dataclass
class FdvvModel:
    button_id: str
    travel_range_mm: float
    activation_point_mm: float
    press_curves: dict[float, BSplineCurve]
    release_curves: dict[float, BSplineCurve] | None = None
    vibration: VibrationDescriptor | None = None
    fit_reports: dict[float, FitReport] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.press_curves:
            raise ValidationError("model needs at least one press curve")
        if not (0 < self.activation_point_mm < self.travel_range_mm):
            raise ValidationError(
                f"activation point {self.activation_point_mm:g} mm must lie inside "
                f"(0, {self.travel_range_mm:g})"
            )
        for v, curve in self.press_curves.items():
            lo, hi = curve.domain
            if abs(hi - self.travel_range_mm) > 1e-6 or abs(lo) > 1e-6:
                raise ValidationError(
                    f"curve at {v:g} mm/s spans [{lo:g}, {hi:g}], expected "
                    f"[0, {self.travel_range_mm:g}]"
                )
        if self.vibration is not None:
            self.vibration.validate(self.travel_range_mm)

    @property
    def velocities(self) -> list[float]:
        return sorted(self.press_curves)

    def curve_at(self, velocity_mm_s: float) -> BSplineCurve:
        """Exact curve if measured; otherwise nearest (ties toward slower)."""
        vs = self.velocities
        if velocity_mm_s in self.press_curves:
            return self.press_curves[velocity_mm_s]
        best = min(vs, key=lambda v: (abs(v - velocity_mm_s), v))
        return self.press_curves[best]

    def target_forces(self, velocity_mm_s: float) -> np.ndarray:
        """Per-bin target force at a velocity, linearly interpolated between
        the two bracketing measured curves (clamped outside the span)."""
        grid = grid_displacements(self.travel_range_mm)
        vs = self.velocities
        if velocity_mm_s in self.press_curves:
            return np.asarray(self.press_curves[velocity_mm_s].evaluate(grid))
        if velocity_mm_s <= vs[0]:
            return np.asarray(self.press_curves[vs[0]].evaluate(grid))
        if velocity_mm_s >= vs[-1]:
            return np.asarray(self.press_curves[vs[-1]].evaluate(grid))
        hi = next(v for v in vs if v > velocity_mm_s)
        lo = max(v for v in vs if v < velocity_mm_s)
        w = (velocity_mm_s - lo) / (hi - lo)
        f_lo = np.asarray(self.press_curves[lo].evaluate(grid))
        f_hi = np.asarray(self.press_curves[hi].evaluate(grid))
        return (1.0 - w) * f_lo + w * f_hi


def build_model(
    per_velocity: dict[float, PressSegment],
    button_id: str,
    activation_point_mm: float,
    vibration: VibrationDescriptor | None = None,
    k_range: tuple[int, int] = (4, 30),
    penalty: float = DEFAULT_PENALTY,
    release_per_velocity: dict[float, PressSegment] | None = None,
) -> FdvvModel:
    """Fit a selected-order curve per velocity and assemble the model."""
    if not per_velocity:
        raise ValidationError("need at least one velocity segment")
    travels = {s.travel_range_mm for s in per_velocity.values()}
    if len(travels) > 1:
        raise ValidationError(f"inconsistent travel ranges across velocities: {sorted(travels)}")

    curves: dict[float, BSplineCurve] = {}
    reports: dict[float, FitReport] = {}
    for velocity, segment in sorted(per_velocity.items()):
        best_k, all_reports = select_order(segment, k_range, penalty=penalty)
        curve, report = fit_curve(segment, best_k, penalty=penalty)
        curves[velocity] = curve
        reports[velocity] = report

    release = None
    if release_per_velocity:
        release = {
            v: fit_curve(s, select_order(s, k_range, penalty=penalty)[0], penalty=penalty)[0]
            for v, s in sorted(release_per_velocity.items())
        }

    return FdvvModel(
        button_id=button_id,
        travel_range_mm=float(travels.pop()),
        activation_point_mm=activation_point_mm,
        press_curves=curves,
        release_curves=release,
        vibration=vibration,
        fit_reports=reports,
    )


def _curves_to_json(curves: dict[float, BSplineCurve]) -> list[dict]:
    return [
        {
            "velocity_mm_s": v,
            "degree": c.degree,
            "control_points": c.control_points(),
        }
        for v, c in sorted(curves.items())
    ]


def _curves_from_json(entries: list[dict]) -> dict[float, BSplineCurve]:
    curves = {}
    for entry in entries:
        points = np.asarray(entry["control_points"], dtype=float)
        curves[float(entry["velocity_mm_s"])] = BSplineCurve(
            points[:, 0], points[:, 1], degree=int(entry.get("degree", 3))
        )
    return curves


def model_to_dict(model: FdvvModel) -> dict:
    out = {
        "button_id": model.button_id,
        "travel_range_mm": model.travel_range_mm,
        "activation_point_mm": model.activation_point_mm,
        "press_curves": _curves_to_json(model.press_curves),
    }
    if model.release_curves:
        out["release_curves"] = _curves_to_json(model.release_curves)
    if model.vibration is not None:
        out["vibration"] = model.vibration.to_dict()
    return out


def model_from_dict(payload: dict) -> FdvvModel:
    try:
        vibration = None
        if payload.get("vibration") is not None:
            v = payload["vibration"]
            vibration = VibrationDescriptor(
                onset_mm=float(v["onset_mm"]),
                duration_ms=float(v["duration_ms"]),
                frequency_hz=float(v["frequency_hz"]),
                template_id=str(v.get("template_id", "")),
            )
        return FdvvModel(
            button_id=str(payload["button_id"]),
            travel_range_mm=float(payload["travel_range_mm"]),
            activation_point_mm=float(payload["activation_point_mm"]),
            press_curves=_curves_from_json(payload["press_curves"]),
            release_curves=(
                _curves_from_json(payload["release_curves"])
                if payload.get("release_curves")
                else None
            ),
            vibration=vibration,
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ParseError(f"model file missing or malformed field: {exc}") from exc


def serialize_model(model: FdvvModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def parse_model(data: str | bytes) -> FdvvModel:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(payload)
