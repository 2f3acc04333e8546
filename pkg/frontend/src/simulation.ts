// Simulation panel: stream per-tick records over the session WebSocket, draw
// the rendered force against the target curve, and pin event markers.

import type { ModelJson, TickRecord, TraceSummary } from './types.js';
import { sampleSpline } from './spline.js';
import {
  ChartLayout,
  drawAxes,
  drawLine,
  drawVerticalMarker,
} from './chart.js';

export interface EventMarkers {
  activation?: number;
  vibration_start?: number;
  bottom_out?: number;
  release?: number;
}

/**
 * Displacement to pin each event marker at. The vibration marker uses the
 * controller's scheduled trigger displacement (onset - 0.3 mm pre-trigger),
 * not the tick's own filtered reading, which can overshoot at fast presses.
 */
export function traceMarkers(records: TickRecord[]): EventMarkers {
  const markers: EventMarkers = {};
  for (const record of records) {
    for (const event of record.events) {
      if (event === 'vibration_start' && markers.vibration_start === undefined) {
        markers.vibration_start = record.vibration_trigger_mm ?? record.filtered_disp_mm;
      } else if (
        (event === 'activation' || event === 'bottom_out' || event === 'release') &&
        markers[event] === undefined
      ) {
        markers[event] = record.filtered_disp_mm;
      }
    }
  }
  return markers;
}

export function forceOverDisplacement(records: TickRecord[]): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  let prevRaw = Number.POSITIVE_INFINITY; // first tick has no predecessor
  for (const r of records) {
    if (r.raw_disp_mm > prevRaw) out.push([r.filtered_disp_mm, r.plant_force_cN]);
    prevRaw = r.raw_disp_mm;
  }
  return out;
}

const MARKER_COLORS: Record<keyof EventMarkers, string> = {
  activation: '#0a7d38',
  vibration_start: '#c2410c',
  bottom_out: '#6b21a8',
  release: '#64748b',
};

export class SimulationPanel {
  private records: TickRecord[] = [];
  private summary: TraceSummary | null = null;
  private socket: WebSocket | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private statusEl: HTMLElement,
    private targetVelocity: () => number,
  ) {}

  private layout(model: ModelJson, forceMax: number): ChartLayout {
    return {
      width: this.canvas.width,
      height: this.canvas.height,
      margin: { left: 46, right: 12, top: 14, bottom: 30 },
      bounds: { xMin: 0, xMax: model.travel_range_mm, yMin: 0, yMax: forceMax },
    };
  }

  stream(socketUrl: string, model: ModelJson, onDone?: () => void): void {
    this.records = [];
    this.summary = null;
    this.statusEl.textContent = 'streaming...';
    this.socket?.close();
    const socket = new WebSocket(socketUrl);
    this.socket = socket;
    let pending = 0;
    socket.onmessage = (message) => {
      const payload = JSON.parse(message.data as string);
      if (payload.event === 'done') {
        this.summary = payload.summary as TraceSummary;
        this.draw(model);
        this.statusEl.textContent = this.summaryText();
        onDone?.();
        return;
      }
      if (payload.event === 'error') {
        this.statusEl.textContent = `stream error: ${payload.error}`;
        return;
      }
      this.records.push(payload as TickRecord);
      // redraw in batches to keep well above 30 fps on long presses
      if (++pending >= 25) {
        pending = 0;
        this.draw(model);
      }
    };
    socket.onerror = () => {
      this.statusEl.textContent = 'websocket error';
    };
  }

  showTrace(records: TickRecord[], summary: TraceSummary, model: ModelJson): void {
    this.records = records;
    this.summary = summary;
    this.draw(model);
    this.statusEl.textContent = this.summaryText();
  }

  private summaryText(): string {
    if (!this.summary) return '';
    const mean = this.summary.mean_abs_error_cN;
    const gap = mean !== undefined ? `, mean gap ${mean.toFixed(2)} cN` : '';
    return `${this.summary.ticks} ticks${gap}`;
  }

  markers(): EventMarkers {
    return traceMarkers(this.records);
  }

  draw(model: ModelJson): void {
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return;
    if (this.records.length === 0 && !model) return;

    const rendered = forceOverDisplacement(this.records);
    const targetCurve = this.pickTargetCurve(model);
    const target = targetCurve ? sampleSpline(targetCurve.control_points, targetCurve.degree) : [];
    const forceMax =
      Math.max(60, ...rendered.map(([, f]) => f), ...target.map(([, f]) => f)) * 1.1;
    const layout = this.layout(model, forceMax);

    drawAxes(ctx, layout, 'displacement (mm)', 'force (cN)');
    if (this.records.length === 0) {
      ctx.fillStyle = '#777';
      ctx.font = '12px system-ui, sans-serif';
      ctx.fillText('no samples: run a simulation or pick a longer trajectory', 60, 40);
      return;
    }
    if (target.length) drawLine(ctx, layout, target, '#94a3b8', 1.4, true);
    drawLine(ctx, layout, rendered, '#2563eb', 1.8);
    const markers = this.markers();
    (Object.keys(markers) as Array<keyof EventMarkers>).forEach((event) => {
      const at = markers[event];
      if (at !== undefined) drawVerticalMarker(ctx, layout, at, MARKER_COLORS[event], event);
    });
  }

  private pickTargetCurve(model: ModelJson) {
    if (!model.press_curves.length) return null;
    const v = this.targetVelocity();
    return model.press_curves.reduce((best, curve) =>
      Math.abs(curve.velocity_mm_s - v) < Math.abs(best.velocity_mm_s - v) ? curve : best,
    );
  }
}
