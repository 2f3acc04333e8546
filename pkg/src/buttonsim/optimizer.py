"""Bayesian optimization of an 8-parameter button design against a simulated
temporal-pointing user.

The design is a 3-control-point actuation curve plus activation and vibration
points. The simulated user's timing error shrinks with feedback salience: a
crisp force edge at the activation point and a vibration cue nearby. The
optimizer fits a Gaussian-process surrogate on range-normalized parameters and
picks the next design by expected improvement over a quasi-random candidate
set.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.stats import qmc

from .actuation import ActuationCurve
from .capture import GRID_STEP_MM, grid_displacements
from .errors import ValidationError
from .spline import BSplineCurve

DESIGN_TRAVEL_MM = 6.2  # optimizer designs run on the full-travel simulator

PARAM_RANGES: dict[str, tuple[float, float]] = {
    "x1": (0.0, 1.0),
    "x2": (1.0, 3.0),
    "x3": (3.0, 6.2),
    "y1": (20.0, 180.0),
    "y2": (20.0, 180.0),
    "y3": (20.0, 180.0),
    "p_a": (0.5, 5.5),
    "p_v": (0.5, 5.5),
}
PARAM_NAMES = tuple(PARAM_RANGES)

# Salience model: weight on the force-edge term vs the vibration-proximity
# term; slopes saturate around s_ref so one steep segment cannot dominate.
SALIENCE_W1 = 0.5
SALIENCE_W2 = 0.5
SLOPE_REF = 100.0  # actuation units per mm
SLOPE_WINDOW_MM = 0.25
VIBRATION_PROXIMITY_MM = 0.5


@dataclass(frozen=True)
class ButtonParams:
    x1: float
    x2: float
    x3: float
    y1: float
    y2: float
    y3: float
    p_a: float
    p_v: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            lo, hi = PARAM_RANGES[name]
            value = getattr(self, name)
            closed = name in ("y1", "y2", "y3", "p_a", "p_v")
            inside = lo <= value <= hi if closed else lo <= value < hi
            if not inside:
                raise ValidationError(
                    f"{name}={value:g} outside [{lo:g}, {hi:g}{']' if closed else ')'}"
                )

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES])

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_array(values) -> "ButtonParams":
        return ButtonParams(**{n: float(v) for n, v in zip(PARAM_NAMES, values)})


def _normalize(x: np.ndarray) -> np.ndarray:
    lo = np.array([PARAM_RANGES[n][0] for n in PARAM_NAMES])
    hi = np.array([PARAM_RANGES[n][1] for n in PARAM_NAMES])
    return (x - lo) / (hi - lo)


def _denormalize(z: np.ndarray) -> np.ndarray:
    lo = np.array([PARAM_RANGES[n][0] for n in PARAM_NAMES])
    hi = np.array([PARAM_RANGES[n][1] for n in PARAM_NAMES])
    x = lo + z * (hi - lo)
    # keep half-open upper bounds open
    for i, name in enumerate(PARAM_NAMES):
        if name in ("x1", "x2", "x3"):
            x[i] = min(x[i], PARAM_RANGES[name][1] - 1e-9)
    return x


def params_to_actuation(params: ButtonParams) -> tuple[ActuationCurve, dict]:
    """Sample the 3-point design spline on the 50 um grid.

    The quadratic spline spans [x1, x3]; outside it the curve holds the end
    levels. Returns the single-velocity curve plus annotations.
    """
    spline = BSplineCurve(
        np.array([params.x1, params.x2, params.x3]),
        np.array([params.y1, params.y2, params.y3]),
        degree=2,
    )
    grid = grid_displacements(DESIGN_TRAVEL_MM)
    u = np.empty_like(grid)
    below = grid < params.x1
    above = grid > params.x3
    inside = ~(below | above)
    u[below] = params.y1
    u[above] = params.y3
    u[inside] = spline.evaluate(grid[inside])
    curve = ActuationCurve(velocity_mm_s=100.0, travel_range_mm=DESIGN_TRAVEL_MM, u=u)
    annotations = {"activation_point_mm": params.p_a, "vibration_point_mm": params.p_v}
    return curve, annotations


def feedback_salience(params: ButtonParams) -> float:
    """Documented salience: saturating force-edge slope near the activation
    point plus an exponential bonus for vibration landing close to it."""
    curve, _ = params_to_actuation(params)
    grid = curve.grid_mm
    slopes = np.abs(np.gradient(curve.u, GRID_STEP_MM))
    window = np.abs(grid - params.p_a) <= SLOPE_WINDOW_MM
    max_slope = float(np.max(slopes[window])) if np.any(window) else 0.0
    edge_term = math.tanh(max_slope / SLOPE_REF)
    proximity_term = math.exp(-abs(params.p_v - params.p_a) / VIBRATION_PROXIMITY_MM)
    return SALIENCE_W1 * edge_term + SALIENCE_W2 * proximity_term


@dataclass
class SimulatedUser:
    base_asynchrony_ms: float = 100.0
    haptic_gain_ms: float = 35.0
    motor_noise_sigma_ms: float = 5.0
    seed: int = 0


DIFFICULTY_OFFSET_MS = {"easy": 0.0, "difficult": 12.0}


def evaluate_design(
    params: ButtonParams,
    user: SimulatedUser,
    difficulty: str = "easy",
    trials: int = 20,
) -> float:
    """Mean asynchrony over repeated simulated temporal-pointing presses.

    Noise is drawn per (user seed, trial index), so the mean is invariant to
    trial order and identical designs replay identically.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if difficulty not in DIFFICULTY_OFFSET_MS:
        raise ValidationError(f"unknown difficulty '{difficulty}'")
    salience = feedback_salience(params)
    clean = (
        user.base_asynchrony_ms
        + DIFFICULTY_OFFSET_MS[difficulty]
        - user.haptic_gain_ms * salience
    )
    total = 0.0
    for trial in range(trials):
        rng = np.random.default_rng((user.seed, trial))
        total += clean + rng.normal(0.0, user.motor_noise_sigma_ms)
    return total / trials


class GpSurrogate:
    """Squared-exponential GP on the unit cube, fixed hyperparameters."""

    def __init__(self, lengthscale: float = 0.35, noise_var: float = 1e-6):
        self.lengthscale = lengthscale
        self.noise_var = noise_var
        self._X = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> None:
        self._X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self._y_mean = float(y.mean())
        self._y_centered = y - self._y_mean
        self.signal_var = max(float(np.var(y)), 1e-12)
        K = self._kernel(self._X, self._X)
        K[np.diag_indices_from(K)] += self.noise_var * self.signal_var + 1e-10
        self._chol = np.linalg.cholesky(K)
        self._alpha = np.linalg.solve(
            self._chol.T, np.linalg.solve(self._chol, self._y_centered)
        )

    def _kernel(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
        return self.signal_var * np.exp(-0.5 * d2 / self.lengthscale**2)

    def predict(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Kq = self._kernel(np.asarray(Xq, dtype=float), self._X)
        mean = Kq @ self._alpha + self._y_mean
        v = np.linalg.solve(self._chol, Kq.T)
        var = np.maximum(self.signal_var - np.sum(v**2, axis=0), 1e-18)
        return mean, np.sqrt(var)


def expected_improvement(mean: np.ndarray, std: np.ndarray, best: float, xi: float = 0.0):
    from scipy.stats import norm

    delta = best - mean - xi
    z = np.where(std > 0, delta / np.maximum(std, 1e-18), 0.0)
    return delta * norm.cdf(z) + std * norm.pdf(z)


@dataclass
class BoState:
    seed: int = 0
    candidates: int = 4096
    lengthscale: float = 0.35
    noise_var: float = 1e-6
    xi: float = 0.0
    observed: list[tuple[ButtonParams, float]] = field(default_factory=list)
    iteration: int = 0

    def incumbent(self) -> tuple[ButtonParams, float]:
        if not self.observed:
            raise ValidationError("no observations yet")
        return min(self.observed, key=lambda pair: pair[1])

    def record(self, params: ButtonParams, value: float) -> None:
        self.observed.append((params, value))
        self.iteration += 1


def _sobol_params(state: BoState, n: int) -> np.ndarray:
    sampler = qmc.Sobol(d=len(PARAM_NAMES), scramble=True, seed=state.seed + state.iteration)
    return sampler.random(n)


def bo_step(state: BoState) -> ButtonParams:
    """Propose the next design.

    No observations: the range midpoint. One observation: a space-filling
    draw. Otherwise: argmax expected improvement over a quasi-random
    candidate set under the GP surrogate.
    """
    if len(state.observed) == 0:
        mid = np.array([(lo + hi) / 2 for lo, hi in PARAM_RANGES.values()])
        return ButtonParams.from_array(mid)
    if len(state.observed) == 1:
        z = _sobol_params(state, 1)[0]
        return ButtonParams.from_array(_denormalize(z))

    X = np.stack([_normalize(p.to_array()) for p, _ in state.observed])
    y = np.array([v for _, v in state.observed])
    gp = GpSurrogate(lengthscale=state.lengthscale, noise_var=state.noise_var)
    try:
        gp.fit(X, y)
    except np.linalg.LinAlgError:
        warnings.warn("GP fit failed; falling back to a random candidate")
        z = _sobol_params(state, 1)[0]
        return ButtonParams.from_array(_denormalize(z))

    Z = _sobol_params(state, state.candidates)
    mean, std = gp.predict(Z)
    ei = expected_improvement(mean, std, best=float(y.min()), xi=state.xi)
    return ButtonParams.from_array(_denormalize(Z[int(np.argmax(ei))]))


def random_params(rng: np.random.Generator) -> ButtonParams:
    z = rng.uniform(0.0, 1.0, len(PARAM_NAMES))
    return ButtonParams.from_array(_denormalize(z))


def optimize(
    user: SimulatedUser,
    difficulty: str = "easy",
    budget: int = 30,
    trials_per_eval: int = 20,
    state: BoState | None = None,
) -> tuple[ButtonParams, list[dict]]:
    """BO loop: propose, evaluate, record; returns the incumbent and history."""
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    if state is None:
        state = BoState(seed=user.seed)
    history = []
    for _ in range(budget):
        params = bo_step(state)
        value = evaluate_design(params, user, difficulty, trials_per_eval)
        state.record(params, value)
        incumbent_params, incumbent_value = state.incumbent()
        history.append(
            {
                "iteration": state.iteration,
                "params": params.to_dict(),
                "mean_asynchrony_ms": value,
                "incumbent_ms": incumbent_value,
            }
        )
    return state.incumbent()[0], history
