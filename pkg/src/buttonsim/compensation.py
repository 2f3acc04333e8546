"""Iterative compensation: tune per-bin actuation until the plant reproduces a
target force curve.

Each iteration simulates one press through the render engine, bins the
measured force every 50 um, and nudges the actuation by a gain scheduled on
the current error. The error blends the average and the worst per-bin
deviation (weight alpha, default 0.7).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .actuation import ActuationCurve
from .capture import bin_index, grid_size
from .errors import DivergenceError, ValidationError
from .model import FdvvModel
from .plant import VirtualPlant, calibrate

DEFAULT_ALPHA = 0.7
# Gain schedule: aggressive steps while far from the target, conservative near
# convergence; both expressed as fractions of the inverse calibrated gain.
GAIN_HI_FRACTION = 0.8
GAIN_LO_FRACTION = 0.4
GAIN_SWITCH_ERROR_CN = 10.0
DIVERGENCE_GROWTH_LIMIT = 5
STALL_LIMIT = 6


def error_metric(y_d: np.ndarray, y_k: np.ndarray, alpha: float = DEFAULT_ALPHA) -> float:
    """alpha * mean(|y_d - y_k|) + (1 - alpha) * max(|y_d - y_k|)."""
    y_d = np.asarray(y_d, dtype=float)
    y_k = np.asarray(y_k, dtype=float)
    if y_d.shape != y_k.shape:
        raise ValidationError(f"force vectors differ in length: {y_d.shape} vs {y_k.shape}")
    if not (0.0 <= alpha <= 1.0):
        raise ValidationError("alpha must lie in [0, 1]")
    diff = np.abs(y_d - y_k)
    return float(alpha * diff.mean() + (1.0 - alpha) * diff.max())


@dataclass
class GainSchedule:
    gamma_hi: float
    gamma_lo: float
    switch_error_cN: float = GAIN_SWITCH_ERROR_CN

    def __call__(self, error_cN: float) -> float:
        return self.gamma_hi if error_cN > self.switch_error_cN else self.gamma_lo


@dataclass
class CompensationState:
    iteration: int
    actuation: ActuationCurve
    y_d: np.ndarray
    y_k: np.ndarray
    alpha: float
    gamma_schedule: GainSchedule
    u_max: float
    error_cN: float = field(init=False)

    def __post_init__(self):
        self.error_cN = error_metric(self.y_d, self.y_k, self.alpha)


def update_signals(state: CompensationState) -> ActuationCurve:
    """One fixed-point step: u += gamma(error) * (y_d - y_k), clamped to the
    plant-valid actuation range."""
    gamma = state.gamma_schedule(state.error_cN)
    u_next = state.actuation.u + gamma * (state.y_d - state.y_k)
    return ActuationCurve(
        velocity_mm_s=state.actuation.velocity_mm_s,
        travel_range_mm=state.actuation.travel_range_mm,
        u=np.clip(u_next, 0.0, state.u_max),
    )


def _measure_press(
    curve: ActuationCurve,
    plant: VirtualPlant,
    velocity_mm_s: float,
    config,
    presses: int = 4,
) -> np.ndarray:
    """Measure the rendered force per bin at one velocity.

    Runs several phase-offset presses per iteration and aggregates all samples
    within each 50 um bin: at 1 kHz a single fast press skips bins (a 200 mm/s
    press advances 4 bins per tick), and the phase offsets fill the lattice.
    Forces are keyed by the displacement the controller acted on (the filtered
    reading), which keeps the learning loop aligned with the lookup. Bins no
    press visited are filled by interpolation.
    """
    from .render import PressTrajectory, constant_velocity_press, run_press

    n = grid_size(curve.travel_range_mm)
    base = constant_velocity_press(
        depth_mm=curve.travel_range_mm,
        velocity_mm_s=velocity_mm_s,
        rest_ms=config.ma_window + 5,
        hold_ms=config.ma_window + 10,
    )
    step = velocity_mm_s / 1000.0
    sums = np.zeros(n)
    counts = np.zeros(n, dtype=int)
    for p in range(presses):
        phase = p * step / presses
        d = base.displacement_mm
        shifted = np.where(d > 0, np.minimum(d + phase, curve.travel_range_mm), 0.0)
        trajectory = PressTrajectory(base.profile, shifted)
        trace = run_press(curve, trajectory, config, plant.clone(seed=plant.seed + 31 * p))
        disp = np.array([r.filtered_disp_mm for r in trace.records])
        force = np.array([r.plant_force_cN for r in trace.records])
        moving = disp > 1e-9
        idx = bin_index(disp[moving], curve.travel_range_mm)
        sums += np.bincount(idx, weights=force[moving], minlength=n)
        counts += np.bincount(idx, minlength=n)
    hit = counts > 0
    y = np.full(n, np.nan)
    y[hit] = sums[hit] / counts[hit]
    if not np.all(hit):
        grid = curve.grid_mm
        y[~hit] = np.interp(grid[~hit], grid[hit], y[hit])
    return y


def run_compensation(
    model: FdvvModel,
    plant: VirtualPlant,
    velocity_mm_s: float,
    max_iters: int = 12,
    tol_cN: float = 3.0,
    alpha: float = DEFAULT_ALPHA,
    gamma_hi: float | None = None,
    gamma_lo: float | None = None,
    initial_u: float | np.ndarray | None = None,
    seed_offset: int = 0,
) -> tuple[ActuationCurve, list[float]]:
    """Iterate press / measure / update until the error falls under tol_cN.

    Returns the actuation from the best-error iteration and the full error
    trace. Raises DivergenceError when the error grows for 5 consecutive
    iterations, or stalls far from the target with no improvement.
    """
    from .render import SimConfig  # local: avoids cycle

    y_d = model.target_forces(velocity_mm_s)
    n = len(y_d)
    slope, _ = calibrate(plant)
    schedule = GainSchedule(
        gamma_hi=(GAIN_HI_FRACTION / slope) if gamma_hi is None else gamma_hi,
        gamma_lo=(GAIN_LO_FRACTION / slope) if gamma_lo is None else gamma_lo,
    )
    config = SimConfig(
        travel_range_mm=model.travel_range_mm,
        activation_point_mm=model.activation_point_mm,
    )

    if initial_u is None:
        u0 = np.full(n, 0.5 * plant.u_max)
    else:
        u0 = np.broadcast_to(np.asarray(initial_u, dtype=float), (n,)).copy()
    curve = ActuationCurve(velocity_mm_s, model.travel_range_mm, np.clip(u0, 0, plant.u_max))

    errors: list[float] = []
    best: tuple[float, ActuationCurve] | None = None
    growth_run = 0
    stall_run = 0
    for iteration in range(max_iters):
        press_plant = plant.clone(seed=plant.seed + 7919 * (iteration + 1) + seed_offset)
        y_k = _measure_press(curve, press_plant, velocity_mm_s, config)
        state = CompensationState(
            iteration=iteration,
            actuation=curve,
            y_d=y_d,
            y_k=y_k,
            alpha=alpha,
            gamma_schedule=schedule,
            u_max=plant.u_max,
        )
        errors.append(state.error_cN)

        if best is None or state.error_cN < best[0]:
            best = (state.error_cN, curve)
            stall_run = 0
        else:
            stall_run += 1
        if len(errors) >= 2 and errors[-1] > errors[-2]:
            growth_run += 1
        else:
            growth_run = 0

        if growth_run >= DIVERGENCE_GROWTH_LIMIT:
            raise DivergenceError(
                f"error grew {DIVERGENCE_GROWTH_LIMIT} consecutive iterations "
                f"(last {errors[-1]:.3g} cN)",
                error_trace=errors,
            )
        if stall_run >= STALL_LIMIT and best[0] > 10.0 * tol_cN:
            raise DivergenceError(
                f"no progress for {STALL_LIMIT} iterations at error "
                f"{best[0]:.3g} cN (target {tol_cN:g} cN)",
                error_trace=errors,
            )
        if state.error_cN <= tol_cN:
            break
        curve = update_signals(state)

    return best[1], errors


def compensate_model(
    model: FdvvModel,
    plant: VirtualPlant,
    velocities: list[float] | None = None,
    runs: int = 4,
    max_iters: int = 15,
    tol_cN: float = 1.5,
    finalize_sigma_mm: float = 1.2,
    interpolate_to: int | None = None,
):
    """Full compensation pass: per velocity, run the loop several times,
    average, smooth, and optionally densify across velocity.

    Returns (ActuationTable, {velocity: [error traces per run]}).
    """
    from .actuation import ActuationTable, finalize_actuation, interpolate_velocities

    if velocities is None:
        velocities = model.velocities
    curves = []
    traces: dict[float, list[list[float]]] = {}
    for v in velocities:
        run_curves = []
        traces[v] = []
        for r in range(runs):
            curve, errs = run_compensation(
                model, plant, v, max_iters=max_iters, tol_cN=tol_cN, seed_offset=1000 * r
            )
            run_curves.append(curve)
            traces[v].append(errs)
        curves.append(finalize_actuation(run_curves, sigma_mm=finalize_sigma_mm))
    interpolated = False
    if interpolate_to is not None and len(curves) >= 2:
        curves = interpolate_velocities(curves, interpolate_to)
        interpolated = True
    table = ActuationTable(
        button_id=model.button_id,
        plant_id=plant.plant_id,
        curves=curves,
        interpolated=interpolated,
    )
    return table, traces
