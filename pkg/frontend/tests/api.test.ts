import assert from 'node:assert/strict';
import { test } from 'node:test';

import { ApiError, Client, isConflict, isValidationError, saveWithRevisionRetry } from '../src/api.js';
import type { ControlPointEdit } from '../src/types.js';

type Handler = (url: string, init?: RequestInit) => { status: number; body: unknown };

function withMockFetch(handler: Handler): () => void {
  const original = globalThis.fetch;
  globalThis.fetch = (async (url: RequestInfo | URL, init?: RequestInit) => {
    const { status, body } = handler(String(url), init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { 'content-type': 'application/json' },
    });
  }) as typeof fetch;
  return () => {
    globalThis.fetch = original;
  };
}

const edit: ControlPointEdit = {
  revision: 1,
  velocity_mm_s: 100,
  control_points: Array.from({ length: 15 }, (_, i) => [(4 * i) / 14, 50] as [number, number]),
};

test('save returns the new revision', async () => {
  const restore = withMockFetch(() => ({ status: 200, body: { revision: 2 } }));
  try {
    const client = new Client('http://service');
    const out = await client.saveControlPoints('b', edit);
    assert.equal(out.revision, 2);
  } finally {
    restore();
  }
});

test('409 surfaces as a conflict error', async () => {
  const restore = withMockFetch(() => ({ status: 409, body: { detail: 'revision 1 is stale' } }));
  try {
    const client = new Client('http://service');
    await assert.rejects(client.saveControlPoints('b', edit), (e: unknown) => isConflict(e));
  } finally {
    restore();
  }
});

test('422 carries field-level details', async () => {
  const restore = withMockFetch(() => ({
    status: 422,
    body: { detail: [{ field: 'activation_point_mm', error: 'outside travel' }] },
  }));
  try {
    const client = new Client('http://service');
    await assert.rejects(client.saveControlPoints('b', edit), (e: unknown) => {
      assert.ok(isValidationError(e));
      assert.equal((e as ApiError).fields[0].field, 'activation_point_mm');
      return true;
    });
  } finally {
    restore();
  }
});

test('saveWithRevisionRetry rebases once on conflict', async () => {
  const puts: number[] = [];
  const restore = withMockFetch((url, init) => {
    if (init?.method === 'PUT') {
      const body = JSON.parse(String(init.body)) as ControlPointEdit;
      puts.push(body.revision);
      if (body.revision === 1) return { status: 409, body: { detail: 'stale' } };
      return { status: 200, body: { revision: body.revision + 1 } };
    }
    if (url.endsWith('/models/b')) {
      return { status: 200, body: { revision: 5, model: {} } };
    }
    return { status: 404, body: { detail: 'nope' } };
  });
  try {
    const client = new Client('http://service');
    const out = await saveWithRevisionRetry(client, 'b', edit);
    assert.deepEqual(puts, [1, 5]);
    assert.equal(out.revision, 6);
    assert.equal(out.rebased, true);
  } finally {
    restore();
  }
});

test('non-conflict errors are not retried', async () => {
  let attempts = 0;
  const restore = withMockFetch(() => {
    attempts += 1;
    return { status: 500, body: { detail: 'boom' } };
  });
  try {
    const client = new Client('http://service');
    await assert.rejects(saveWithRevisionRetry(client, 'b', edit));
    assert.equal(attempts, 1);
  } finally {
    restore();
  }
});
