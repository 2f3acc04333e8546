"""Virtual force-actuator plant: a parametric stand-in for simulator hardware.

The plant maps an actuation command to resisting force through a monotone
static shape, a velocity damping term, output saturation, a first-order lag,
and optional Gaussian sensor noise. Actuation is valid on [0, u_max] where
u_max is the command that just reaches saturation through the static path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .errors import ParseError, ValidationError

DEFAULT_SATURATION_CN = 440.0  # hardware-class peak force (4.4 N)


@dataclass
class VirtualPlant:
    plant_id: str = "default"
    static_gain: float = 2.0  # cN per actuation unit at the linear point
    bias_cN: float = 0.0
    saturation_cN: float = DEFAULT_SATURATION_CN
    nonlinearity: float = 1.15  # monotone shaping exponent on u
    lag_constant_ms: float = 1.5  # first-order response time constant
    damping_coeff: float = 0.005  # cN per (mm/s) of keycap velocity
    noise_sigma_cN: float = 0.5
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)
    _prev_force: float = field(init=False, repr=False, compare=False, default=0.0)

    def __post_init__(self):
        if self.static_gain < 0 or self.saturation_cN <= 0:
            raise ValidationError("plant gain must be >= 0 and saturation positive")
        if self.nonlinearity <= 0:
            raise ValidationError("nonlinearity exponent must be positive")
        self._rng = np.random.default_rng(self.seed)
        self._prev_force = 0.0

    @property
    def u_max(self) -> float:
        """Actuation command that reaches saturation through the static path."""
        if self.static_gain == 0:
            return self.saturation_cN  # arbitrary but finite range for a dead plant
        return (self.saturation_cN - self.bias_cN) / self.static_gain

    def clone(self, seed: int | None = None) -> "VirtualPlant":
        """Independent copy (fresh noise stream); use one clone per press."""
        return replace(self, seed=self.seed if seed is None else seed)

    def reset(self) -> None:
        self._prev_force = 0.0
        self._rng = np.random.default_rng(self.seed)

    def _shape(self, u: float) -> float:
        # Normalized so the exponent bends the curve without moving u_max.
        ref = self.u_max
        if ref <= 0:
            return 0.0
        return ref * (max(u, 0.0) / ref) ** self.nonlinearity

    def static_response(self, u: float, velocity_mm_s: float = 0.0) -> float:
        """Steady-state force for a held command: no lag, no noise."""
        raw = self.bias_cN + self.static_gain * self._shape(u) + self.damping_coeff * velocity_mm_s
        return float(np.clip(raw, 0.0, self.saturation_cN))

    def respond(
        self, u: float, velocity_mm_s: float = 0.0, prev_force_cN: float | None = None
    ) -> float:
        """One 1 ms tick of plant output.

        With prev_force_cN omitted the plant tracks its own output state. The
        lag uses the exact first-order discretization, so a held command
        matches the continuous closed form at every tick.
        """
        if u < 0:
            raise ValidationError("actuation must be non-negative")
        prev = self._prev_force if prev_force_cN is None else prev_force_cN
        target = self.static_response(u, velocity_mm_s)
        if self.lag_constant_ms <= 0:
            force = target
        else:
            alpha = 1.0 - math.exp(-1.0 / self.lag_constant_ms)
            force = prev + alpha * (target - prev)
        self._prev_force = force
        if self.noise_sigma_cN > 0:
            force += float(self._rng.normal(0.0, self.noise_sigma_cN))
        return float(np.clip(force, 0.0, self.saturation_cN))


def identity_plant(saturation_cN: float = DEFAULT_SATURATION_CN, **overrides) -> VirtualPlant:
    """Unity-gain, lag-free, noiseless plant; force equals actuation."""
    params = dict(
        plant_id="identity",
        static_gain=1.0,
        bias_cN=0.0,
        saturation_cN=saturation_cN,
        nonlinearity=1.0,
        lag_constant_ms=0.0,
        damping_coeff=0.0,
        noise_sigma_cN=0.0,
    )
    params.update(overrides)
    return VirtualPlant(**params)


def plant_to_dict(plant: VirtualPlant) -> dict:
    out = asdict(plant)
    out.pop("_rng", None)
    out.pop("_prev_force", None)
    return out


def plant_from_dict(payload: dict) -> VirtualPlant:
    try:
        return VirtualPlant(
            plant_id=str(payload.get("plant_id", "default")),
            static_gain=float(payload["static_gain"]),
            bias_cN=float(payload.get("bias_cN", 0.0)),
            saturation_cN=float(payload.get("saturation_cN", DEFAULT_SATURATION_CN)),
            nonlinearity=float(payload.get("nonlinearity", 1.0)),
            lag_constant_ms=float(payload.get("lag_constant_ms", 0.0)),
            damping_coeff=float(payload.get("damping_coeff", 0.0)),
            noise_sigma_cN=float(payload.get("noise_sigma_cN", 0.0)),
            seed=int(payload.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"plant file missing or malformed field: {exc}") from exc


def serialize_plant(plant: VirtualPlant) -> str:
    return json.dumps(plant_to_dict(plant), indent=2)


def parse_plant(data: str | bytes) -> VirtualPlant:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"plant file is not valid JSON: {exc}") from exc
    return plant_from_dict(payload)


def calibrate(plant: VirtualPlant, settle_ms: int | None = None, average_ms: int = 20):
    """Two-pulse linear map between actuation units and steady-state force.

    Returns (slope, offset): force ~= slope * u + offset around the operating
    range. The calibration clone leaves the caller's plant state untouched.
    """
    probe = plant.clone(seed=plant.seed + 104729)
    if settle_ms is None:
        settle_ms = max(int(8 * max(plant.lag_constant_ms, 1.0)), 20)
    levels = (0.25 * plant.u_max, 0.75 * plant.u_max)
    forces = []
    for u in levels:
        probe.reset()
        readings = []
        for tick in range(settle_ms + average_ms):
            f = probe.respond(u, velocity_mm_s=0.0)
            if tick >= settle_ms:
                readings.append(f)
        forces.append(float(np.mean(readings)))
    slope = (forces[1] - forces[0]) / (levels[1] - levels[0])
    if abs(slope) < 1e-12:
        slope = 1e-12  # dead plant; keeps downstream gains finite
    offset = forces[0] - slope * levels[0]
    return slope, offset
