// Minimal canvas chart: displacement (mm) on x, force (cN) on y, with
// draggable-point hit testing and event markers.

export interface Bounds {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

export interface ChartLayout {
  width: number;
  height: number;
  margin: { left: number; right: number; top: number; bottom: number };
  bounds: Bounds;
}

export function toScreen(layout: ChartLayout, x: number, y: number): [number, number] {
  const { margin, width, height, bounds } = layout;
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const sx = margin.left + ((x - bounds.xMin) / (bounds.xMax - bounds.xMin)) * plotW;
  const sy = height - margin.bottom - ((y - bounds.yMin) / (bounds.yMax - bounds.yMin)) * plotH;
  return [sx, sy];
}

export function toData(layout: ChartLayout, sx: number, sy: number): [number, number] {
  const { margin, width, height, bounds } = layout;
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const x = bounds.xMin + ((sx - margin.left) / plotW) * (bounds.xMax - bounds.xMin);
  const y = bounds.yMin + ((height - margin.bottom - sy) / plotH) * (bounds.yMax - bounds.yMin);
  return [x, y];
}

export function drawAxes(
  ctx: CanvasRenderingContext2D,
  layout: ChartLayout,
  xLabel: string,
  yLabel: string,
): void {
  const { margin, width, height, bounds } = layout;
  ctx.save();
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = '#d0d5dc';
  ctx.fillStyle = '#5a6472';
  ctx.font = '11px system-ui, sans-serif';
  ctx.lineWidth = 1;

  const xTicks = 8;
  for (let i = 0; i <= xTicks; i++) {
    const x = bounds.xMin + ((bounds.xMax - bounds.xMin) * i) / xTicks;
    const [sx] = toScreen(layout, x, bounds.yMin);
    ctx.beginPath();
    ctx.moveTo(sx, margin.top);
    ctx.lineTo(sx, height - margin.bottom);
    ctx.stroke();
    ctx.fillText(x.toFixed(1), sx - 8, height - margin.bottom + 14);
  }
  const yTicks = 6;
  for (let i = 0; i <= yTicks; i++) {
    const y = bounds.yMin + ((bounds.yMax - bounds.yMin) * i) / yTicks;
    const [, sy] = toScreen(layout, bounds.xMin, y);
    ctx.beginPath();
    ctx.moveTo(margin.left, sy);
    ctx.lineTo(width - margin.right, sy);
    ctx.stroke();
    ctx.fillText(y.toFixed(0), 4, sy + 3);
  }
  ctx.fillText(xLabel, width / 2 - 30, height - 4);
  ctx.save();
  ctx.translate(10, height / 2 + 20);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(yLabel, 0, 0);
  ctx.restore();
  ctx.restore();
}

export function drawLine(
  ctx: CanvasRenderingContext2D,
  layout: ChartLayout,
  points: Array<[number, number]>,
  color: string,
  width = 1.6,
  dashed = false,
): void {
  if (points.length === 0) return;
  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.setLineDash(dashed ? [5, 4] : []);
  ctx.beginPath();
  points.forEach(([x, y], i) => {
    const [sx, sy] = toScreen(layout, x, y);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.stroke();
  ctx.restore();
}

export function drawPoint(
  ctx: CanvasRenderingContext2D,
  layout: ChartLayout,
  x: number,
  y: number,
  color: string,
  radius = 5,
): void {
  const [sx, sy] = toScreen(layout, x, y);
  ctx.save();
  ctx.beginPath();
  ctx.arc(sx, sy, radius, 0, Math.PI * 2);
  ctx.fillStyle = color;
  ctx.strokeStyle = '#ffffff';
  ctx.lineWidth = 1.5;
  ctx.fill();
  ctx.stroke();
  ctx.restore();
}

export function drawVerticalMarker(
  ctx: CanvasRenderingContext2D,
  layout: ChartLayout,
  x: number,
  color: string,
  label: string,
): void {
  const [sx] = toScreen(layout, x, layout.bounds.yMin);
  ctx.save();
  ctx.strokeStyle = color;
  ctx.setLineDash([3, 3]);
  ctx.beginPath();
  ctx.moveTo(sx, layout.margin.top);
  ctx.lineTo(sx, layout.height - layout.margin.bottom);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = color;
  ctx.font = '10px system-ui, sans-serif';
  ctx.fillText(label, sx + 3, layout.margin.top + 10);
  ctx.restore();
}

/** Index of the point within `threshold` px of the cursor, or -1. */
export function hitTest(
  layout: ChartLayout,
  points: Array<[number, number]>,
  sx: number,
  sy: number,
  threshold = 9,
): number {
  let best = -1;
  let bestDist = threshold;
  points.forEach(([x, y], i) => {
    const [px, py] = toScreen(layout, x, y);
    const dist = Math.hypot(px - sx, py - sy);
    if (dist <= bestDist) {
      best = i;
      bestDist = dist;
    }
  });
  return best;
}
