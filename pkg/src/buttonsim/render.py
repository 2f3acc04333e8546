"""Discrete-time (1 kHz) button controller simulation.

Each tick: sense the finger's commanded displacement, clamp it at the travel
limiter, smooth it with the moving-average filter, update the press-velocity
estimate, look up the actuation command for the current 50 um bin, drive the
plant, and record events (activation, vibration trigger, bottom-out, release).

The velocity estimate regresses the raw limited displacement rather than the
moving-average output: the filter's fill-in bias would otherwise halve the
slope seen early in a press, and the estimate must resolve before the filter
window is full.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .actuation import ActuationCurve
from .capture import GRID_STEP_MM, bin_index, grid_displacements
from .errors import ParseError, ValidationError
from .model import FdvvModel
from .plant import VirtualPlant, calibrate

PHYSICAL_MAX_TRAVEL_MM = 6.2
TICK_MS = 1.0


@dataclass(frozen=True)
class PressTrajectory:
    """The finger's intended keycap depth over time, sampled every 1 ms."""

    profile: str
    displacement_mm: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.displacement_mm, dtype=float)
        object.__setattr__(self, "displacement_mm", d)
        if d.size and (d.min() < 0 or d.max() > PHYSICAL_MAX_TRAVEL_MM + 1e-9):
            raise ValidationError(
                f"trajectory displacement outside [0, {PHYSICAL_MAX_TRAVEL_MM}] mm"
            )

    @property
    def t_ms(self) -> np.ndarray:
        return np.arange(len(self.displacement_mm)) * TICK_MS

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "samples": [[float(t), float(d)] for t, d in zip(self.t_ms, self.displacement_mm)],
        }


def trajectory_from_dict(payload: dict) -> PressTrajectory:
    try:
        samples = np.asarray(payload["samples"], dtype=float)
        profile = str(payload.get("profile", "recorded"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"trajectory file malformed: {exc}") from exc
    if samples.size == 0:
        return PressTrajectory(profile, np.empty(0))
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise ParseError("trajectory samples must be [t_ms, d_mm] pairs")
    dt = np.diff(samples[:, 0])
    if samples.shape[0] >= 2 and not np.allclose(dt, TICK_MS, atol=1e-6):
        raise ValidationError("trajectory samples must be spaced exactly 1 ms apart")
    return PressTrajectory(profile, samples[:, 1])


def constant_velocity_press(
    depth_mm: float,
    velocity_mm_s: float,
    rest_ms: int = 0,
    hold_ms: int = 0,
    release: bool = False,
) -> PressTrajectory:
    """Linear ramp to depth at the given speed, with optional rest and hold."""
    step = velocity_mm_s / 1000.0  # mm per tick
    n_down = max(int(math.ceil(depth_mm / step)), 1)
    down = np.minimum(np.arange(1, n_down + 1) * step, depth_mm)
    parts = [np.zeros(rest_ms), down, np.full(hold_ms, depth_mm)]
    if release:
        parts.append(np.maximum(depth_mm - np.arange(1, n_down + 1) * step, 0.0))
    return PressTrajectory("constant-velocity", np.concatenate(parts))


def minimum_jerk_press(
    depth_mm: float,
    peak_velocity_mm_s: float,
    rest_ms: int = 0,
    hold_ms: int = 0,
) -> PressTrajectory:
    """Smooth bell-velocity press; peak speed fixes the movement duration."""
    duration_ms = 1.875 * depth_mm / peak_velocity_mm_s * 1000.0
    n = max(int(round(duration_ms)), 2)
    tau = np.arange(1, n + 1) / n
    down = depth_mm * (10 * tau**3 - 15 * tau**4 + 6 * tau**5)
    return PressTrajectory(
        "minimum-jerk", np.concatenate([np.zeros(rest_ms), down, np.full(hold_ms, depth_mm)])
    )


@dataclass
class SimConfig:
    travel_range_mm: float
    activation_point_mm: float
    vibration_onset_mm: float | None = None
    ma_window: int = 25
    velocity_window_mm: tuple[float, float] = (0.5, 1.0)
    min_velocity_samples: int = 3
    vibration_pretrigger_mm: float = 0.3
    vibration_latency_ms: float = 7.0
    preset: dict | None = None

    def __post_init__(self):
        if not (0 < self.activation_point_mm < self.travel_range_mm):
            raise ValidationError("activation point must lie inside (0, travel_range)")
        if self.travel_range_mm > PHYSICAL_MAX_TRAVEL_MM + 1e-9:
            raise ValidationError(f"travel range above physical max {PHYSICAL_MAX_TRAVEL_MM} mm")
        if self.ma_window < 1:
            raise ValidationError("moving-average window must be >= 1")


def load_preset(name_or_path: str) -> dict:
    """Load a step-hook preset from a packaged name or a JSON file path."""
    from pathlib import Path

    path = Path(name_or_path)
    if not path.exists():
        path = Path(__file__).parent / "presets" / f"{name_or_path.replace('-', '_')}.json"
    if not path.exists():
        raise ValidationError(f"unknown preset '{name_or_path}'")
    payload = json.loads(path.read_text())
    return payload.get("preset", payload)


def config_for_model(model: FdvvModel, **overrides) -> SimConfig:
    """SimConfig carrying a model's travel, activation, and vibration onset."""
    params = dict(
        travel_range_mm=model.travel_range_mm,
        activation_point_mm=model.activation_point_mm,
        vibration_onset_mm=model.vibration.onset_mm if model.vibration else None,
    )
    params.update(overrides)
    return SimConfig(**params)


class MovingAverage:
    """Mean of the last min(window, seen) samples."""

    def __init__(self, window: int):
        self.window = window
        self._buf: deque[float] = deque(maxlen=window)
        self._sum = 0.0

    def push(self, x: float) -> float:
        if len(self._buf) == self.window:
            self._sum -= self._buf[0]
        self._buf.append(x)
        self._sum += x
        return self._sum / len(self._buf)


class VelocityEstimator:
    """Least-squares press speed from raw samples inside the sensing window.

    Stays pending until the displacement exits the window top; resolves only
    if at least min_samples landed inside, otherwise reports failure and the
    renderer keeps its slowest-curve fallback.
    """

    def __init__(self, window_mm: tuple[float, float], min_samples: int):
        self.window_mm = window_mm
        self.min_samples = min_samples
        self.samples: list[tuple[float, float]] = []
        self.value_mm_s: float | None = None
        self.failed = False

    @property
    def pending(self) -> bool:
        return self.value_mm_s is None and not self.failed

    def update(self, t_ms: float, raw_disp_mm: float) -> None:
        if not self.pending:
            return
        lo, hi = self.window_mm
        if lo <= raw_disp_mm <= hi:
            self.samples.append((t_ms, raw_disp_mm))
        elif raw_disp_mm > hi:
            if len(self.samples) >= self.min_samples:
                t = np.array([s[0] for s in self.samples])
                d = np.array([s[1] for s in self.samples])
                slope = np.polyfit(t, d, 1)[0]  # mm per ms
                self.value_mm_s = float(slope * 1000.0)
            else:
                self.failed = True


def select_actuation(tables: list[ActuationCurve], velocity_mm_s: float) -> ActuationCurve:
    """Nearest-velocity curve; ties break toward the slower one."""
    if not tables:
        raise ValidationError("no actuation curves to select from")
    return min(tables, key=lambda c: (abs(c.velocity_mm_s - velocity_mm_s), c.velocity_mm_s))


@dataclass
class TickRecord:
    t_ms: float
    raw_disp_mm: float
    filtered_disp_mm: float
    est_velocity_mm_s: float | None
    selected_curve_velocity_mm_s: float
    u: float
    plant_force_cN: float
    events: list[str] = field(default_factory=list)
    # Sub-tick crossing estimate the vibration command is scheduled against;
    # set on the tick carrying vibration_start. At fast presses the filtered
    # readout advances several bins per tick, so the audio channel gets the
    # interpolated crossing rather than the tick's own displacement.
    vibration_trigger_mm: float | None = None

    def to_dict(self) -> dict:
        return {
            "t_ms": self.t_ms,
            "raw_disp_mm": self.raw_disp_mm,
            "filtered_disp_mm": self.filtered_disp_mm,
            "est_velocity_mm_s": self.est_velocity_mm_s,
            "selected_curve_velocity_mm_s": self.selected_curve_velocity_mm_s,
            "u": self.u,
            "plant_force_cN": self.plant_force_cN,
            "events": list(self.events),
            "vibration_trigger_mm": self.vibration_trigger_mm,
        }


@dataclass
class RenderTrace:
    records: list[TickRecord]
    summary: dict

    def events(self) -> list[tuple[float, str]]:
        return [(r.t_ms, e) for r in self.records for e in r.events]

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r.to_dict()) for r in self.records)


class PressEngine:
    """State for one press; step() advances a single 1 ms tick."""

    def __init__(self, tables: list[ActuationCurve], config: SimConfig, plant: VirtualPlant):
        for curve in tables:
            if abs(curve.travel_range_mm - config.travel_range_mm) > 1e-6:
                raise ValidationError(
                    f"actuation travel {curve.travel_range_mm:g} mm does not match "
                    f"config travel {config.travel_range_mm:g} mm"
                )
        self.tables = sorted(tables, key=lambda c: c.velocity_mm_s)
        self.config = config
        self.plant = plant
        self.filter = MovingAverage(config.ma_window)
        self.estimator = VelocityEstimator(config.velocity_window_mm, config.min_velocity_samples)
        self.tick = 0
        self.prev_raw = 0.0
        self.prev_filtered = 0.0
        self.prev_force = 0.0
        self.fired: set[str] = set()
        self._preset_state: dict = {}

    def _apply_preset(self, u: float, record: TickRecord) -> float:
        preset = self.config.preset
        if not preset:
            return u
        kind = preset.get("kind")
        if kind == "non_newtonian":
            # Velocity-stiffening: command grows with estimated press speed.
            v = record.est_velocity_mm_s or 0.0
            u = u * (1.0 + preset.get("stiffen_per_mm_s", 0.0) * v)
        elif kind == "multi_level":
            for i, level in enumerate(preset.get("levels_mm", [])):
                key = f"detent_{i}"
                if key not in self.fired and record.filtered_disp_mm >= level:
                    self.fired.add(key)
                    record.events.append(f"detent_{i}")
        elif kind == "vibration_ticks":
            period = max(int(preset.get("period_ms", 50)), 1)
            if record.raw_disp_mm >= self.config.travel_range_mm - 1e-9:
                at_bottom = self._preset_state.setdefault("bottom_ticks", 0)
                if at_bottom % period == 0:
                    record.events.append("vibration_tick")
                self._preset_state["bottom_ticks"] = at_bottom + 1
        elif kind == "fast_tapping":
            if "bottom_out" in record.events:
                record.events.append("auto_return")
        elif kind == "dynamic_return":
            if "release" in record.events:
                self._preset_state["cooldown_until"] = record.t_ms + preset.get(
                    "cooldown_ms", 200
                )
            until = self._preset_state.get("cooldown_until")
            if until is not None and record.t_ms >= until:
                record.events.append("return_ready")
                self._preset_state["cooldown_until"] = None
        return u

    def step(self, commanded_disp_mm: float) -> TickRecord:
        cfg = self.config
        raw = min(max(commanded_disp_mm, 0.0), cfg.travel_range_mm)  # travel limiter
        filtered = min(self.filter.push(raw), cfg.travel_range_mm)
        t = self.tick * TICK_MS

        self.estimator.update(t, raw)
        est = self.estimator.value_mm_s
        if self.tables:
            selected = (
                self.tables[0] if est is None else select_actuation(self.tables, est)
            )
            sel_velocity = selected.velocity_mm_s
            u = float(selected.u[int(bin_index(filtered, cfg.travel_range_mm))])
        else:
            sel_velocity, u = 0.0, 0.0

        record = TickRecord(
            t_ms=t,
            raw_disp_mm=raw,
            filtered_disp_mm=filtered,
            est_velocity_mm_s=est,
            selected_curve_velocity_mm_s=sel_velocity,
            u=u,
            plant_force_cN=0.0,
        )

        if "activation" not in self.fired and (
            self.prev_filtered < cfg.activation_point_mm <= filtered
        ):
            self.fired.add("activation")
            record.events.append("activation")
        if "activation" in self.fired and "release" not in self.fired and (
            filtered < cfg.activation_point_mm
        ):
            self.fired.add("release")
            record.events.append("release")
        if cfg.vibration_onset_mm is not None and "vibration_start" not in self.fired and (
            filtered >= cfg.vibration_onset_mm - cfg.vibration_pretrigger_mm
        ):
            self.fired.add("vibration_start")
            record.events.append("vibration_start")
            threshold = cfg.vibration_onset_mm - cfg.vibration_pretrigger_mm
            record.vibration_trigger_mm = float(
                min(max(threshold, self.prev_filtered), filtered)
            )
        if "bottom_out" not in self.fired and raw >= cfg.travel_range_mm - 1e-9:
            self.fired.add("bottom_out")
            record.events.append("bottom_out")

        u = self._apply_preset(u, record)
        record.u = u

        keycap_velocity = (raw - self.prev_raw) / TICK_MS * 1000.0  # mm/s
        record.plant_force_cN = self.plant.respond(
            max(u, 0.0), keycap_velocity, self.prev_force
        )

        self.prev_raw = raw
        self.prev_filtered = filtered
        self.prev_force = record.plant_force_cN
        self.tick += 1
        return record


def _model_to_tables(model: FdvvModel, plant: VirtualPlant) -> list[ActuationCurve]:
    """Naive feedforward actuation through the calibration map (no compensation)."""
    slope, offset = calibrate(plant)
    grid = grid_displacements(model.travel_range_mm)
    tables = []
    for v in model.velocities:
        target = np.asarray(model.press_curves[v].evaluate(grid))
        u = np.clip((target - offset) / slope, 0.0, plant.u_max)
        tables.append(ActuationCurve(v, model.travel_range_mm, u))
    return tables


def run_press(
    source,
    trajectory: PressTrajectory,
    config: SimConfig,
    plant: VirtualPlant,
    target_model: FdvvModel | None = None,
) -> RenderTrace:
    """Drive a whole press through the engine.

    source may be a list of ActuationCurve, a single ActuationCurve, or an
    FdvvModel (rendered uncompensated through the plant's calibration map).
    The plant is cloned and reset, so identical inputs replay bit-identically.
    """
    if isinstance(source, FdvvModel):
        tables = _model_to_tables(source, plant)
        if target_model is None:
            target_model = source
    elif isinstance(source, ActuationCurve):
        tables = [source]
    else:
        tables = list(source)

    run_plant = plant.clone()
    run_plant.reset()
    engine = PressEngine(tables, config, run_plant)
    records = [engine.step(d) for d in trajectory.displacement_mm]

    summary: dict = {"ticks": len(records)}
    if target_model is not None and records:
        downstroke = [
            r
            for prev, r in zip([None] + records[:-1], records)
            if prev is not None and r.raw_disp_mm > prev.raw_disp_mm
        ]
        if downstroke:
            disp = np.array([r.filtered_disp_mm for r in downstroke])
            force = np.array([r.plant_force_cN for r in downstroke])
            n = len(grid_displacements(config.travel_range_mm))
            idx = bin_index(disp, config.travel_range_mm)
            sums = np.bincount(idx, weights=force, minlength=n)
            counts = np.bincount(idx, minlength=n)
            hit = counts > 0
            measured = sums[hit] / counts[hit]
            sel = downstroke[-1].selected_curve_velocity_mm_s
            target = target_model.target_forces(sel)[hit]
            summary.update(
                {
                    "bins_measured": int(hit.sum()),
                    "target_velocity_mm_s": sel,
                    "mean_abs_error_cN": float(np.mean(np.abs(measured - target))),
                    "max_abs_error_cN": float(np.max(np.abs(measured - target))),
                }
            )
    return RenderTrace(records=records, summary=summary)
