"""Clamped B-spline force curves: evaluation, least-squares fitting, and
information-criterion order selection.

A curve is a scalar spline f(d) = sum_j c_j B_j(d) over a clamped knot vector
derived from the control-point displacements, so the endpoints interpolate the
first and last control forces. Fitting keeps the knots fixed and solves for
the control forces only; the order search scores each candidate count with a
penalized information criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .capture import GRID_STEP_MM, PressSegment
from .errors import DomainError, FitError, ValidationError

DEFAULT_DEGREE = 3
DEFAULT_PENALTY = 2.5
# Residual variance floor (cN^2): keeps the log-likelihood finite on noiseless
# data, where the penalty term alone should decide the order.
VARIANCE_FLOOR = 1e-12


def knots_from_controls(x: np.ndarray, degree: int) -> np.ndarray:
    """Clamped knot vector via the averaging rule.

    Uniformly spaced control displacements yield uniformly spaced interior
    knots; the ends are clamped with multiplicity degree+1.
    """
    k = len(x)
    if k < degree + 1:
        raise ValidationError(f"need at least {degree + 1} control points for degree {degree}")
    interior = [float(np.mean(x[j : j + degree])) for j in range(1, k - degree)]
    return np.concatenate(
        [np.full(degree + 1, x[0]), interior, np.full(degree + 1, x[-1])]
    )


def _find_span(knots: np.ndarray, degree: int, u: float) -> int:
    """Index i with knots[i] <= u < knots[i+1], right end mapped into the last span."""
    n = len(knots) - degree - 2  # highest basis index
    if u >= knots[n + 1]:
        return n
    if u <= knots[degree]:
        return degree
    return int(np.searchsorted(knots, u, side="right") - 1)


def basis_row(knots: np.ndarray, degree: int, u: float) -> tuple[int, np.ndarray]:
    """Nonzero basis values at u (Cox-de Boor triangle).

    Returns (span, values) where values[j] = B_{span-degree+j}(u).
    """
    span = _find_span(knots, degree, u)
    vals = np.zeros(degree + 1)
    vals[0] = 1.0
    left = np.zeros(degree + 1)
    right = np.zeros(degree + 1)
    for j in range(1, degree + 1):
        left[j] = u - knots[span + 1 - j]
        right[j] = knots[span + j] - u
        saved = 0.0
        for r in range(j):
            denom = right[r + 1] + left[j - r]
            temp = vals[r] / denom if denom != 0 else 0.0
            vals[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        vals[j] = saved
    return span, vals


@dataclass(frozen=True)
class BSplineCurve:
    """Scalar spline over displacement with clamped ends."""

    control_x_mm: np.ndarray
    control_y: np.ndarray
    degree: int = DEFAULT_DEGREE

    def __post_init__(self):
        x = np.asarray(self.control_x_mm, dtype=float)
        y = np.asarray(self.control_y, dtype=float)
        object.__setattr__(self, "control_x_mm", x)
        object.__setattr__(self, "control_y", y)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValidationError("control point arrays must be 1-d and equal length")
        if len(x) < self.degree + 1:
            raise ValidationError(
                f"{len(x)} control points cannot support degree {self.degree}"
            )
        if np.any(np.diff(x) < 0):
            raise ValidationError("control-point displacements must be non-decreasing")
        object.__setattr__(self, "knots", knots_from_controls(x, self.degree))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.control_x_mm[0]), float(self.control_x_mm[-1])

    def __call__(self, d) -> np.ndarray | float:
        return self.evaluate(d)

    def evaluate(self, d) -> np.ndarray | float:
        """de Boor evaluation at displacement(s) d; out of domain raises."""
        scalar = np.isscalar(d)
        ds = np.atleast_1d(np.asarray(d, dtype=float))
        lo, hi = self.domain
        tol = 1e-9
        if np.any(ds < lo - tol) or np.any(ds > hi + tol):
            bad = ds[(ds < lo - tol) | (ds > hi + tol)][0]
            raise DomainError(f"displacement {bad:g} mm outside [{lo:g}, {hi:g}] mm")
        out = np.empty_like(ds)
        for i, u in enumerate(np.clip(ds, lo, hi)):
            span, vals = basis_row(self.knots, self.degree, float(u))
            out[i] = float(np.dot(vals, self.control_y[span - self.degree : span + 1]))
        return float(out[0]) if scalar else out

    def control_points(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in zip(self.control_x_mm, self.control_y)]


def basis_matrix(x_controls: np.ndarray, degree: int, d: np.ndarray) -> np.ndarray:
    """Design matrix B[i, j] = B_j(d_i) on the knots implied by x_controls."""
    knots = knots_from_controls(np.asarray(x_controls, dtype=float), degree)
    k = len(x_controls)
    B = np.zeros((len(d), k))
    for i, u in enumerate(d):
        span, vals = basis_row(knots, degree, float(u))
        B[i, span - degree : span + 1] = vals
    return B


def quantile_controls(domain_hi: float, k: int, domain_lo: float = 0.0) -> np.ndarray:
    """Control displacements at uniform quantiles of the domain."""
    return np.linspace(domain_lo, domain_hi, k)


@dataclass(frozen=True)
class FitReport:
    n: int
    k: int
    log_likelihood: float
    rmse_cN: float
    bic_star: float


def gaussian_log_likelihood(n: int, rss: float) -> float:
    """Maximized Gaussian log-likelihood from the residual sum of squares."""
    var = max(rss / n, VARIANCE_FLOOR)
    return -0.5 * n * (math.log(var) + 1.0 + math.log(2.0 * math.pi))


def bic_star(n: int, k: int, log_likelihood: float, penalty: float = DEFAULT_PENALTY) -> float:
    """Penalized information criterion: ln(n) * k * P - 2 * ln(L)."""
    if n < 1 or k < 1:
        raise ValidationError("bic_star requires n >= 1 and k >= 1")
    return math.log(n) * k * penalty - 2.0 * log_likelihood


def fit_curve(
    segment: PressSegment,
    k: int,
    degree: int = DEFAULT_DEGREE,
    penalty: float = DEFAULT_PENALTY,
) -> tuple[BSplineCurve, FitReport]:
    """Least-squares spline fit of a gridded press at a fixed control count."""
    if k < degree + 1:
        raise FitError(f"k={k} below minimum {degree + 1} for degree {degree}")
    grid = segment.grid_mm
    n = len(grid)
    if n < k:
        raise FitError(f"segment has {n} bins, fewer than k={k} control points")

    x_controls = quantile_controls(segment.travel_range_mm, k)
    B = basis_matrix(x_controls, degree, grid)
    coeffs, _, rank, _ = np.linalg.lstsq(B, segment.force_cN, rcond=None)
    if rank < k:
        raise FitError(f"rank-deficient design matrix (rank {rank} < k={k})")

    residuals = segment.force_cN - B @ coeffs
    rss = float(np.dot(residuals, residuals))
    log_l = gaussian_log_likelihood(n, rss)
    report = FitReport(
        n=n,
        k=k,
        log_likelihood=log_l,
        rmse_cN=math.sqrt(rss / n),
        bic_star=bic_star(n, k, log_l, penalty),
    )
    return BSplineCurve(x_controls, coeffs, degree), report


def select_order(
    segment: PressSegment,
    k_range: tuple[int, int] = (4, 30),
    penalty: float = DEFAULT_PENALTY,
    degree: int = DEFAULT_DEGREE,
) -> tuple[int, list[FitReport]]:
    """Fit every control count in k_range and pick the lowest criterion.

    Ties break toward the smaller count.
    """
    k_min, k_max = k_range
    k_min = max(k_min, degree + 1)
    k_max = min(k_max, len(segment.grid_mm))
    if k_min > k_max:
        raise FitError(f"no feasible control counts in range {k_range}")
    reports = []
    best_k, best_score = None, None
    for k in range(k_min, k_max + 1):
        _, report = fit_curve(segment, k, degree=degree, penalty=penalty)
        reports.append(report)
        if best_score is None or report.bic_star < best_score - 1e-12:
            best_k, best_score = k, report.bic_star
    return best_k, reports
