import assert from 'node:assert/strict';
import { test } from 'node:test';

import { evalSpline, knotsFromControls, sampleSpline, supportRange } from '../src/spline.js';
import type { ControlPoint } from '../src/types.js';

function uniformPoints(n: number, travel: number, level: (i: number) => number): ControlPoint[] {
  return Array.from({ length: n }, (_, i) => [
    (travel * i) / (n - 1),
    level(i),
  ]) as ControlPoint[];
}

test('constant control forces evaluate to the constant anywhere', () => {
  const points = uniformPoints(15, 4, () => 50);
  for (const d of [0, 0.3, 1.7, 3.999, 4]) {
    assert.ok(Math.abs(evalSpline(points, 3, d) - 50) < 1e-9);
  }
});

test('clamped ends interpolate the first and last control forces', () => {
  const points = uniformPoints(8, 4, (i) => 20 + 7 * i);
  assert.ok(Math.abs(evalSpline(points, 3, 0) - 20) < 1e-9);
  assert.ok(Math.abs(evalSpline(points, 3, 4) - (20 + 7 * 7)) < 1e-9);
});

test('averaging knot rule yields uniform interior knots for uniform controls', () => {
  const xs = [0, 1, 2, 3, 4, 5, 6];
  const knots = knotsFromControls(xs, 3);
  assert.equal(knots.length, xs.length + 4);
  const interior = knots.slice(4, knots.length - 4);
  for (let i = 1; i < interior.length; i++) {
    assert.ok(Math.abs(interior[i] - interior[i - 1] - 1) < 1e-12);
  }
});

test('matches values computed by the service math (frozen oracle)', () => {
  // Frozen from the Python implementation: 5 uniform controls over 4 mm,
  // forces [30, 60, 20, 80, 40], cubic, evaluated at four displacements.
  const points: ControlPoint[] = [
    [0, 30],
    [1, 60],
    [2, 20],
    [3, 80],
    [4, 40],
  ];
  const expected: Array<[number, number]> = [
    [0.5, 44.296875],
    [1.5, 44.765625],
    [2.5, 51.953125],
    [3.5, 58.359375],
  ];
  for (const [d, want] of expected) {
    assert.ok(Math.abs(evalSpline(points, 3, d) - want) < 1e-9, `at ${d}`);
  }
});

test('dragging one control point only moves the curve inside its support', () => {
  const before = uniformPoints(15, 4, (i) => 40 + i);
  const after = before.map((p) => [...p]) as ControlPoint[];
  after[7][1] += 20;
  const [lo, hi] = supportRange(before, 3, 7);
  const a = sampleSpline(before, 3, 400);
  const b = sampleSpline(after, 3, 400);
  for (let i = 0; i < a.length; i++) {
    const [d, ya] = a[i];
    const yb = b[i][1];
    if (d < lo - 1e-9 || d > hi + 1e-9) {
      assert.ok(Math.abs(ya - yb) < 1e-9, `curve moved outside support at ${d}`);
    }
  }
  // and it did move somewhere inside
  const moved = a.some(([d, ya], i) => d > lo && d < hi && Math.abs(ya - b[i][1]) > 1);
  assert.ok(moved);
});
