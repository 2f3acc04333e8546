// Client-side edit guards. Deliberately a strict subset of what the service
// accepts: anything that passes here must pass server validation, so the only
// 422s a user can see are from requests forced past these checks.

import type { ControlPointEdit, ControlPoint } from './types.js';

export interface FieldError {
  field: string;
  error: string;
}

export const FORCE_LIMIT_CN = 600; // generous editing ceiling, above any plant

export function validateControlPoints(
  points: ControlPoint[],
  travel: number,
): FieldError[] {
  const errors: FieldError[] = [];
  if (points.length < 4) {
    errors.push({ field: 'control_points', error: 'need at least 4 points' });
    return errors;
  }
  for (let i = 1; i < points.length; i++) {
    if (points[i][0] < points[i - 1][0]) {
      errors.push({
        field: 'control_points',
        error: `point ${i} displacement ${points[i][0].toFixed(3)} is behind point ${i - 1}`,
      });
      break;
    }
  }
  if (Math.abs(points[0][0]) > 1e-9 || Math.abs(points[points.length - 1][0] - travel) > 1e-9) {
    errors.push({ field: 'control_points', error: `curve must span [0, ${travel}]` });
  }
  for (const [d, f] of points) {
    if (d < 0 || d > travel + 1e-9) {
      errors.push({ field: 'control_points', error: `displacement ${d.toFixed(3)} outside travel` });
      break;
    }
    if (f < 0 || f > FORCE_LIMIT_CN) {
      errors.push({ field: 'control_points', error: `force ${f.toFixed(1)} outside [0, ${FORCE_LIMIT_CN}]` });
      break;
    }
  }
  return errors;
}

export function validateEdit(edit: ControlPointEdit, currentTravel: number): FieldError[] {
  const travel = edit.travel_range_mm ?? currentTravel;
  const errors: FieldError[] = [];
  if (!(travel > 0) || travel > 6.2) {
    errors.push({ field: 'travel_range_mm', error: 'travel must be in (0, 6.2] mm' });
  }
  if (edit.activation_point_mm !== undefined) {
    const a = edit.activation_point_mm;
    if (!(a > 0 && a < travel)) {
      errors.push({
        field: 'activation_point_mm',
        error: `activation must lie inside (0, ${travel}) mm`,
      });
    }
  }
  if (edit.vibration) {
    const v = edit.vibration;
    if (!(v.onset_mm > 0 && v.onset_mm < travel)) {
      errors.push({ field: 'vibration.onset_mm', error: `onset must lie inside (0, ${travel}) mm` });
    }
    if (!(v.duration_ms > 0)) {
      errors.push({ field: 'vibration.duration_ms', error: 'duration must be positive' });
    }
    if (!(v.frequency_hz >= 50 && v.frequency_hz <= 20000)) {
      errors.push({ field: 'vibration.frequency_hz', error: 'frequency must be 50 Hz - 20 kHz' });
    }
  }
  errors.push(...validateControlPoints(edit.control_points, travel));
  return errors;
}

/**
 * Clamp a dragged point between its neighbours (ordering guard) and inside
 * the plot bounds; applied continuously during drags so invalid states are
 * unrepresentable rather than rejected after the fact.
 */
export function clampDrag(
  points: ControlPoint[],
  index: number,
  d: number,
  f: number,
  travel: number,
): ControlPoint {
  let lo = index === 0 ? 0 : points[index - 1][0];
  let hi = index === points.length - 1 ? travel : points[index + 1][0];
  // end points stay pinned to the domain ends so the curve spans [0, travel]
  if (index === 0) hi = 0;
  if (index === points.length - 1) lo = travel;
  const dc = Math.min(Math.max(d, lo), hi);
  const fc = Math.min(Math.max(f, 0), FORCE_LIMIT_CN);
  return [dc, fc];
}
