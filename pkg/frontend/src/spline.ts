// Clamped B-spline evaluation matching the service's curve math, so the
// drag preview redraws exactly what the server will store.

import type { ControlPoint } from './types.js';

/** Clamped knot vector from control displacements via the averaging rule. */
export function knotsFromControls(xs: number[], degree: number): number[] {
  const k = xs.length;
  if (k < degree + 1) {
    throw new Error(`need at least ${degree + 1} control points for degree ${degree}`);
  }
  const knots: number[] = [];
  for (let i = 0; i <= degree; i++) knots.push(xs[0]);
  for (let j = 1; j < k - degree; j++) {
    let sum = 0;
    for (let i = j; i < j + degree; i++) sum += xs[i];
    knots.push(sum / degree);
  }
  for (let i = 0; i <= degree; i++) knots.push(xs[k - 1]);
  return knots;
}

function findSpan(knots: number[], degree: number, u: number): number {
  const n = knots.length - degree - 2;
  if (u >= knots[n + 1]) return n;
  if (u <= knots[degree]) return degree;
  let lo = degree;
  let hi = n + 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (u < knots[mid]) hi = mid;
    else lo = mid;
  }
  return lo;
}

/** Nonzero basis values at u (Cox-de Boor triangle). */
function basisRow(knots: number[], degree: number, u: number): { span: number; vals: number[] } {
  const span = findSpan(knots, degree, u);
  const vals = new Array<number>(degree + 1).fill(0);
  const left = new Array<number>(degree + 1).fill(0);
  const right = new Array<number>(degree + 1).fill(0);
  vals[0] = 1;
  for (let j = 1; j <= degree; j++) {
    left[j] = u - knots[span + 1 - j];
    right[j] = knots[span + j] - u;
    let saved = 0;
    for (let r = 0; r < j; r++) {
      const denom = right[r + 1] + left[j - r];
      const temp = denom !== 0 ? vals[r] / denom : 0;
      vals[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    vals[j] = saved;
  }
  return { span, vals };
}

export function evalSpline(points: ControlPoint[], degree: number, d: number): number {
  const xs = points.map((p) => p[0]);
  const ys = points.map((p) => p[1]);
  const lo = xs[0];
  const hi = xs[xs.length - 1];
  const u = Math.min(Math.max(d, lo), hi);
  const knots = knotsFromControls(xs, degree);
  const { span, vals } = basisRow(knots, degree, u);
  let out = 0;
  for (let j = 0; j <= degree; j++) out += vals[j] * ys[span - degree + j];
  return out;
}

/** Curve samples for plotting. */
export function sampleSpline(
  points: ControlPoint[],
  degree: number,
  n = 200,
): Array<[number, number]> {
  const lo = points[0][0];
  const hi = points[points.length - 1][0];
  const xs = points.map((p) => p[0]);
  const ys = points.map((p) => p[1]);
  const knots = knotsFromControls(xs, degree);
  const out: Array<[number, number]> = [];
  for (let i = 0; i <= n; i++) {
    const d = lo + ((hi - lo) * i) / n;
    const { span, vals } = basisRow(knots, degree, d);
    let y = 0;
    for (let j = 0; j <= degree; j++) y += vals[j] * ys[span - degree + j];
    out.push([d, y]);
  }
  return out;
}

/**
 * Index range of curve samples a drag of control point `index` can affect:
 * the basis function's support spans degree+1 knot intervals.
 */
export function supportRange(
  points: ControlPoint[],
  degree: number,
  index: number,
): [number, number] {
  const xs = points.map((p) => p[0]);
  const knots = knotsFromControls(xs, degree);
  return [knots[index], knots[index + degree + 1]];
}
