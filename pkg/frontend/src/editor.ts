// Curve editor: one velocity's force curve at a time, 15 draggable control
// points, annotation fields, revision-guarded save.

import { Client, isConflict, isValidationError } from './api.js';
import {
  ChartLayout,
  drawAxes,
  drawLine,
  drawPoint,
  drawVerticalMarker,
  hitTest,
  toData,
} from './chart.js';
import { sampleSpline } from './spline.js';
import type { ControlPoint, ModelEnvelope, ModelJson } from './types.js';
import { clampDrag, validateEdit, FieldError } from './validate.js';

export interface EditorElements {
  canvas: HTMLCanvasElement;
  velocitySelect: HTMLSelectElement;
  travelInput: HTMLInputElement;
  activationInput: HTMLInputElement;
  vibrationOnsetInput: HTMLInputElement;
  saveButton: HTMLButtonElement;
  revertButton: HTMLButtonElement;
  statusEl: HTMLElement;
  errorsEl: HTMLElement;
  conflictBanner: HTMLElement;
  reloadButton: HTMLButtonElement;
}

export class Editor {
  model: ModelJson | null = null;
  revision = 0;
  buttonId = '';
  points: ControlPoint[] = [];
  dirty = false;
  private dragIndex = -1;
  private onChange: (() => void) | null = null;

  constructor(
    private client: Client,
    private el: EditorElements,
  ) {
    this.bindCanvas();
    this.bindControls();
  }

  setOnChange(fn: () => void): void {
    this.onChange = fn;
  }

  async load(buttonId: string): Promise<void> {
    const envelope: ModelEnvelope = await this.client.getModel(buttonId);
    this.buttonId = buttonId;
    this.applyEnvelope(envelope);
  }

  private applyEnvelope(envelope: ModelEnvelope): void {
    this.model = envelope.model;
    this.revision = envelope.revision;
    this.dirty = false;
    this.el.conflictBanner.hidden = true;

    const velocities = this.model.press_curves.map((c) => c.velocity_mm_s);
    this.el.velocitySelect.innerHTML = '';
    for (const v of velocities) {
      const option = document.createElement('option');
      option.value = String(v);
      option.textContent = `${v} mm/s`;
      this.el.velocitySelect.appendChild(option);
    }
    this.el.travelInput.value = String(this.model.travel_range_mm);
    this.el.activationInput.value = String(this.model.activation_point_mm);
    this.el.vibrationOnsetInput.value = this.model.vibration
      ? String(this.model.vibration.onset_mm)
      : '';
    this.selectVelocity(velocities[0]);
    this.setStatus(`loaded ${this.buttonId} @ rev ${this.revision}`);
  }

  selectedVelocity(): number {
    return Number(this.el.velocitySelect.value);
  }

  selectVelocity(v: number): void {
    if (!this.model) return;
    this.el.velocitySelect.value = String(v);
    const curve = this.model.press_curves.find((c) => c.velocity_mm_s === v);
    this.points = curve ? curve.control_points.map((p) => [p[0], p[1]]) : [];
    this.draw();
  }

  private degree(): number {
    const curve = this.model?.press_curves.find(
      (c) => c.velocity_mm_s === this.selectedVelocity(),
    );
    return curve?.degree ?? 3;
  }

  private layout(): ChartLayout {
    const travel = this.model?.travel_range_mm ?? 4;
    const forceMax = Math.max(60, ...this.points.map((p) => p[1])) * 1.15;
    return {
      width: this.el.canvas.width,
      height: this.el.canvas.height,
      margin: { left: 46, right: 12, top: 14, bottom: 30 },
      bounds: { xMin: 0, xMax: travel, yMin: 0, yMax: forceMax },
    };
  }

  draw(): void {
    const ctx = this.el.canvas.getContext('2d');
    if (!ctx || !this.model) return;
    const layout = this.layout();
    drawAxes(ctx, layout, 'displacement (mm)', 'force (cN)');
    if (this.points.length >= 4) {
      drawLine(ctx, layout, this.points, '#cbd5e1', 1, true); // control polygon
      drawLine(ctx, layout, sampleSpline(this.points, this.degree()), '#2563eb', 2);
    }
    drawVerticalMarker(ctx, layout, Number(this.el.activationInput.value), '#0a7d38', 'activation');
    const onset = Number(this.el.vibrationOnsetInput.value);
    if (onset > 0) drawVerticalMarker(ctx, layout, onset, '#c2410c', 'vibration');
    this.points.forEach(([d, f], i) =>
      drawPoint(ctx, layout, d, f, i === this.dragIndex ? '#1d4ed8' : '#3b82f6'),
    );
  }

  private bindCanvas(): void {
    const canvas = this.el.canvas;
    canvas.addEventListener('pointerdown', (event) => {
      if (!this.model) return;
      const rect = canvas.getBoundingClientRect();
      this.dragIndex = hitTest(
        this.layout(),
        this.points,
        event.clientX - rect.left,
        event.clientY - rect.top,
      );
      if (this.dragIndex >= 0) canvas.setPointerCapture(event.pointerId);
    });
    canvas.addEventListener('pointermove', (event) => {
      if (this.dragIndex < 0 || !this.model) return;
      const rect = canvas.getBoundingClientRect();
      const [d, f] = toData(
        this.layout(),
        event.clientX - rect.left,
        event.clientY - rect.top,
      );
      this.points[this.dragIndex] = clampDrag(
        this.points,
        this.dragIndex,
        d,
        f,
        this.model.travel_range_mm,
      );
      this.markDirty();
      this.draw();
    });
    const finish = () => {
      if (this.dragIndex >= 0) {
        this.dragIndex = -1;
        this.draw();
      }
    };
    canvas.addEventListener('pointerup', finish);
    canvas.addEventListener('pointercancel', finish);
  }

  private bindControls(): void {
    this.el.velocitySelect.addEventListener('change', () =>
      this.selectVelocity(this.selectedVelocity()),
    );
    for (const input of [this.el.travelInput, this.el.activationInput, this.el.vibrationOnsetInput]) {
      input.addEventListener('input', () => {
        this.markDirty();
        this.draw();
      });
    }
    this.el.saveButton.addEventListener('click', () => void this.save());
    this.el.revertButton.addEventListener('click', () => void this.load(this.buttonId));
    this.el.reloadButton.addEventListener('click', () => void this.load(this.buttonId));
  }

  private markDirty(): void {
    this.dirty = true;
    this.setStatus(`editing ${this.buttonId} @ rev ${this.revision} (unsaved)`);
    this.onChange?.();
  }

  buildEdit() {
    const model = this.model!;
    const vibration = model.vibration
      ? { ...model.vibration, onset_mm: Number(this.el.vibrationOnsetInput.value) }
      : undefined;
    return {
      revision: this.revision,
      velocity_mm_s: this.selectedVelocity(),
      control_points: this.points.map((p) => [p[0], p[1]] as ControlPoint),
      travel_range_mm: Number(this.el.travelInput.value),
      activation_point_mm: Number(this.el.activationInput.value),
      ...(vibration ? { vibration } : {}),
    };
  }

  async save(): Promise<void> {
    if (!this.model) return;
    const edit = this.buildEdit();
    const clientErrors = validateEdit(edit, this.model.travel_range_mm);
    if (clientErrors.length > 0) {
      this.showFieldErrors(clientErrors);
      return;
    }
    this.showFieldErrors([]);
    try {
      const { revision } = await this.client.saveControlPoints(this.buttonId, edit);
      this.revision = revision;
      this.dirty = false;
      await this.load(this.buttonId); // read-your-writes: redraw what the server stored
      this.setStatus(`saved ${this.buttonId} @ rev ${revision}`);
    } catch (error) {
      if (isConflict(error)) {
        this.el.conflictBanner.hidden = false;
      } else if (isValidationError(error)) {
        this.showFieldErrors(error.fields);
      } else {
        this.setStatus(`save failed: ${(error as Error).message}`);
      }
    }
  }

  private showFieldErrors(errors: FieldError[]): void {
    this.el.errorsEl.innerHTML = '';
    for (const { field, error } of errors) {
      const li = document.createElement('li');
      li.textContent = `${field}: ${error}`;
      this.el.errorsEl.appendChild(li);
    }
  }

  private setStatus(text: string): void {
    this.el.statusEl.textContent = text;
  }
}
