// Live round-trip against the real service: spawns the Python backend with a
// seeded workspace and drives it exactly the way the editor does.

import assert from 'node:assert/strict';
import { spawn, ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { after, before, test } from 'node:test';

import { Client, isValidationError, saveWithRevisionRetry, ApiError } from '../src/api.js';
import { traceMarkers } from '../src/simulation.js';
import { validateEdit } from '../src/validate.js';
import type { ControlPoint, ControlPointEdit } from '../src/types.js';

const PORT = 8900 + Math.floor(Math.random() * 90);
const BASE = `http://127.0.0.1:${PORT}`;
const BUTTON = 'it-button';

const SERVER_SCRIPT = `
import sys
import uvicorn
from buttonsim.model import build_model
from buttonsim.service import create_app
from buttonsim.store import Workspace
from buttonsim.synthetic import STANDARD_VELOCITIES, segment_from_curve, velocity_scaled_force
from buttonsim.vibration import VibrationDescriptor

ws = Workspace(sys.argv[1])
segments = {
    v: segment_from_curve(lambda d, v=v: velocity_scaled_force(d, v), 4.0, v)
    for v in STANDARD_VELOCITIES
}
model = build_model(
    segments, "${BUTTON}", 2.0, vibration=VibrationDescriptor(2.4, 16.0, 239.0)
)
ws.put_model("${BUTTON}", model)
uvicorn.run(create_app(ws), host="127.0.0.1", port=int(sys.argv[2]), log_level="warning")
`;

let server: ChildProcess | null = null;
let workDir = '';
const client = new Client(BASE);

function spanningPoints(level = 60): ControlPoint[] {
  return Array.from({ length: 15 }, (_, i) => [
    (4 * i) / 14,
    level + 3 * Math.sin(i),
  ]) as ControlPoint[];
}

async function currentRevision(): Promise<number> {
  return (await client.getModel(BUTTON)).revision;
}

before(async () => {
  workDir = mkdtempSync(join(tmpdir(), 'buttonsim-it-'));
  server = spawn('python3', ['-c', SERVER_SCRIPT, workDir, String(PORT)], {
    stdio: ['ignore', 'inherit', 'inherit'],
  });
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      await client.listModels();
      break;
    } catch {
      if (Date.now() > deadline) throw new Error('service did not come up');
      await new Promise((r) => setTimeout(r, 200));
    }
  }
});

after(() => {
  server?.kill();
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

test('integration: drag-edit, save, reload reproduces points and annotations', async () => {
  const points = spanningPoints();
  const revision = await currentRevision();
  const edit: ControlPointEdit = {
    revision,
    velocity_mm_s: 100,
    control_points: points,
    activation_point_mm: 1.8,
    vibration: { onset_mm: 2.5, duration_ms: 16, frequency_hz: 239, template_id: '' },
  };
  assert.deepEqual(validateEdit(edit, 4), []);
  const saved = await client.saveControlPoints(BUTTON, edit);
  assert.equal(saved.revision, revision + 1);

  const reloaded = await client.getModel(BUTTON);
  assert.equal(reloaded.revision, revision + 1);
  const curve = reloaded.model.press_curves.find((c) => c.velocity_mm_s === 100)!;
  assert.deepEqual(curve.control_points, points);
  assert.equal(reloaded.model.activation_point_mm, 1.8);
  assert.equal(reloaded.model.vibration?.onset_mm, 2.5);
});

test('integration: every client-accepted edit is accepted by the server', async () => {
  let seed = 7;
  const rand = () => {
    seed = (seed * 1103515245 + 12345) % 2 ** 31;
    return seed / 2 ** 31;
  };
  let accepted = 0;
  for (let trial = 0; trial < 15; trial++) {
    const n = 15;
    const xs = [0];
    for (let i = 1; i < n - 1; i++) xs.push(rand() * 4);
    xs.push(4);
    xs.sort((a, b) => a - b);
    const points = xs.map((x) => [x, rand() * 300] as ControlPoint);
    const edit: ControlPointEdit = {
      revision: await currentRevision(),
      velocity_mm_s: 150,
      control_points: points,
      activation_point_mm: 0.5 + rand() * 3,
    };
    if (validateEdit(edit, 4).length > 0) continue; // client rejects: not sent
    const saved = await client.saveControlPoints(BUTTON, edit);
    assert.ok(saved.revision > 0);
    accepted += 1;
  }
  assert.ok(accepted >= 10, `only ${accepted} edits exercised the server`);
});

test('integration: forced invariant violation returns 422 with fields', async () => {
  const edit: ControlPointEdit = {
    revision: await currentRevision(),
    velocity_mm_s: 100,
    control_points: spanningPoints(),
    activation_point_mm: 5.5, // past travel: client would reject; force it
  };
  assert.ok(validateEdit(edit, 4).length > 0);
  await assert.rejects(client.saveControlPoints(BUTTON, edit), (e: unknown) => {
    assert.ok(isValidationError(e));
    const fields = (e as ApiError).fields.map((f) => f.field);
    assert.ok(fields.includes('activation_point_mm'));
    return true;
  });
});

test('integration: stale revision returns 409 and rebase retry succeeds', async () => {
  const stale: ControlPointEdit = {
    revision: 0,
    velocity_mm_s: 100,
    control_points: spanningPoints(70),
  };
  await assert.rejects(
    client.saveControlPoints(BUTTON, stale),
    (e: unknown) => e instanceof ApiError && e.status === 409,
  );
  const out = await saveWithRevisionRetry(client, BUTTON, stale);
  assert.equal(out.rebased, true);
});

test('integration: simulated press pins the vibration marker at onset minus 0.3 mm', async () => {
  const { records, summary } = await client.simulate({
    button_id: BUTTON,
    velocity_mm_s: 50,
  });
  assert.equal(summary.ticks, records.length);
  const markers = traceMarkers(records);
  const { model } = await client.getModel(BUTTON);
  const expected = model.vibration!.onset_mm - 0.3;
  assert.ok(markers.vibration_start !== undefined);
  assert.ok(
    Math.abs(markers.vibration_start! - expected) <= 0.05 + 1e-9,
    `marker ${markers.vibration_start} vs ${expected}`,
  );
  assert.ok(markers.activation !== undefined);
  assert.ok(markers.bottom_out !== undefined);
});

test('integration: rating flow moves the best badge', async () => {
  const { templates } = await client.getTemplates(BUTTON);
  assert.equal(templates.length, 9);
  await client.rateTemplate(BUTTON, templates[0].template_id, 3);
  await client.rateTemplate(BUTTON, templates[1].template_id, 5);
  const final = await client.rateTemplate(BUTTON, templates[2].template_id, 7);
  assert.equal(final.best_template_id, templates[2].template_id);
  const bank = await client.getTemplates(BUTTON);
  assert.equal(bank.best_template_id, templates[2].template_id);
});
