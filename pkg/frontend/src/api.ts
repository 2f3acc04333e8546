// REST/WebSocket client for the buttonsim service, with typed errors so the
// editor can distinguish revision conflicts (reload) from field errors
// (inline display).

import type {
  ControlPointEdit,
  JobStatus,
  ModelEnvelope,
  TemplateJson,
  TickRecord,
  TraceSummary,
} from './types.js';
import type { FieldError } from './validate.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public fields: FieldError[] = [],
  ) {
    super(message);
  }
}

export const isConflict = (e: unknown): e is ApiError =>
  e instanceof ApiError && e.status === 409;
export const isValidationError = (e: unknown): e is ApiError =>
  e instanceof ApiError && e.status === 422;

async function raiseFor(response: Response): Promise<never> {
  let detail: unknown = null;
  try {
    detail = (await response.json()).detail;
  } catch {
    /* non-JSON body */
  }
  if (Array.isArray(detail)) {
    throw new ApiError(response.status, 'validation failed', detail as FieldError[]);
  }
  throw new ApiError(response.status, typeof detail === 'string' ? detail : response.statusText);
}

export class Client {
  constructor(public baseUrl: string = '') {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      headers: { 'content-type': 'application/json' },
      ...init,
    });
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as T;
  }

  listModels(): Promise<Array<{ button_id: string; revision: number }>> {
    return this.request('/models');
  }

  getModel(buttonId: string): Promise<ModelEnvelope> {
    return this.request(`/models/${encodeURIComponent(buttonId)}`);
  }

  saveControlPoints(buttonId: string, edit: ControlPointEdit): Promise<{ revision: number }> {
    return this.request(`/models/${encodeURIComponent(buttonId)}/control-points`, {
      method: 'PUT',
      body: JSON.stringify(edit),
    });
  }

  startCompensation(
    buttonId: string,
    body: { plant_id?: string; velocities?: number[]; runs?: number } = {},
  ): Promise<{ job_id: string }> {
    return this.request(`/models/${encodeURIComponent(buttonId)}/compensate`, {
      method: 'POST',
      body: JSON.stringify(body),
    });
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request(`/jobs/${jobId}`);
  }

  async waitForJob(jobId: string, pollMs = 300, timeoutMs = 120_000): Promise<JobStatus> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.getJob(jobId);
      if (job.status === 'done' || job.status === 'error') return job;
      if (Date.now() > deadline) throw new ApiError(408, `job ${jobId} timed out`);
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }

  simulate(body: {
    button_id: string;
    velocity_mm_s?: number;
    profile?: string;
  }): Promise<{ records: TickRecord[]; summary: TraceSummary }> {
    return this.request('/simulate', { method: 'POST', body: JSON.stringify(body) });
  }

  createSession(body: {
    button_id: string;
    velocity_mm_s?: number;
    profile?: string;
  }): Promise<{ session_id: string }> {
    return this.request('/sessions', { method: 'POST', body: JSON.stringify(body) });
  }

  sessionSocketUrl(sessionId: string): string {
    const base = this.baseUrl || window.location.origin;
    return `${base.replace(/^http/, 'ws')}/ws/sessions/${sessionId}`;
  }

  getTemplates(buttonId: string): Promise<{
    templates: TemplateJson[];
    best_template_id: string | null;
    ratings?: Record<string, { score: number }>;
  }> {
    return this.request(`/vibration/${encodeURIComponent(buttonId)}/templates`);
  }

  rateTemplate(
    buttonId: string,
    templateId: string,
    score: number,
  ): Promise<{ best_template_id: string | null; revision: number }> {
    return this.request(`/vibration/${encodeURIComponent(buttonId)}/rate`, {
      method: 'POST',
      body: JSON.stringify({ template_id: templateId, score }),
    });
  }
}

/**
 * Save with one automatic retry after a revision conflict: refetch the model,
 * rebase the edit onto the fresh revision, and resend. Returns the outcome so
 * the editor can surface a banner when the rebase happened.
 */
export async function saveWithRevisionRetry(
  client: Client,
  buttonId: string,
  edit: ControlPointEdit,
): Promise<{ revision: number; rebased: boolean }> {
  try {
    const { revision } = await client.saveControlPoints(buttonId, edit);
    return { revision, rebased: false };
  } catch (error) {
    if (!isConflict(error)) throw error;
    const fresh = await client.getModel(buttonId);
    const { revision } = await client.saveControlPoints(buttonId, {
      ...edit,
      revision: fresh.revision,
    });
    return { revision, rebased: true };
  }
}
