import { Client } from './api.js';
import { Editor, EditorElements } from './editor.js';
import { SimulationPanel } from './simulation.js';
import { VibrationPanel } from './vibration.js';

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

async function boot(): Promise<void> {
  const client = new Client('');
  const elements: EditorElements = {
    canvas: byId<HTMLCanvasElement>('curve-canvas'),
    velocitySelect: byId<HTMLSelectElement>('velocity-select'),
    travelInput: byId<HTMLInputElement>('travel-input'),
    activationInput: byId<HTMLInputElement>('activation-input'),
    vibrationOnsetInput: byId<HTMLInputElement>('vibration-onset-input'),
    saveButton: byId<HTMLButtonElement>('save-button'),
    revertButton: byId<HTMLButtonElement>('revert-button'),
    statusEl: byId('editor-status'),
    errorsEl: byId('field-errors'),
    conflictBanner: byId('conflict-banner'),
    reloadButton: byId<HTMLButtonElement>('reload-button'),
  };
  const editor = new Editor(client, elements);

  const simVelocity = byId<HTMLInputElement>('sim-velocity');
  const simProfile = byId<HTMLSelectElement>('sim-profile');
  const simPanel = new SimulationPanel(
    byId<HTMLCanvasElement>('sim-canvas'),
    byId('sim-status'),
    () => Number(simVelocity.value),
  );
  const vibrationPanel = new VibrationPanel(client, byId('template-list'));

  const modelSelect = byId<HTMLSelectElement>('model-select');
  const models = await client.listModels();
  for (const { button_id, revision } of models) {
    const option = document.createElement('option');
    option.value = button_id;
    option.textContent = `${button_id} (rev ${revision})`;
    modelSelect.appendChild(option);
  }

  async function loadSelected(): Promise<void> {
    if (!modelSelect.value) return;
    await editor.load(modelSelect.value);
    await vibrationPanel.load(modelSelect.value);
  }
  modelSelect.addEventListener('change', () => void loadSelected());

  byId<HTMLButtonElement>('compensate-button').addEventListener('click', async () => {
    const status = byId('job-status');
    status.textContent = 'compensating...';
    try {
      const { job_id } = await client.startCompensation(editor.buttonId, {
        velocities: [Number(simVelocity.value)],
        runs: 2,
      });
      const job = await client.waitForJob(job_id);
      status.textContent =
        job.status === 'done' ? `compensated (job ${job_id})` : `failed: ${job.error}`;
    } catch (error) {
      status.textContent = `failed: ${(error as Error).message}`;
    }
  });

  byId<HTMLButtonElement>('simulate-button').addEventListener('click', async () => {
    if (!editor.model) return;
    try {
      const { session_id } = await client.createSession({
        button_id: editor.buttonId,
        velocity_mm_s: Number(simVelocity.value),
        profile: simProfile.value,
      });
      simPanel.stream(client.sessionSocketUrl(session_id), editor.model);
    } catch (error) {
      byId('sim-status').textContent = `failed: ${(error as Error).message}`;
    }
  });

  if (models.length > 0) {
    modelSelect.value = models[0].button_id;
    await loadSelected();
  } else {
    byId('editor-status').textContent =
      'no models in the workspace: create one with the CLI (fit) first';
  }
}

void boot();
