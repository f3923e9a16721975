/**
 * Figure assembly: axes, stderr bands, bound lines, legend.
 *
 * Rendering is a pure function of the input CSV bytes; the output PNG
 * for a given set of inputs is byte-stable across reruns.
 */

import { writeFileSync } from "node:fs";
import { readCurve, readRollouts } from "./csv.js";
import { cumulativeSeries, trainingSeries, type Series } from "./series.js";
import {
  AXIS_GRAY,
  BLACK,
  GRID_GRAY,
  Raster,
  type Rgb,
} from "./raster.js";
import { textWidth } from "./font.js";

export interface CumulativeSpec {
  inputs: string[];
  out: string;
  /** contrastive count L; draws the ln(L+1) line and arms the bound check */
  boundL?: number;
}

export interface TrainingSpec {
  inputs: string[];
  out: string;
  boundL: number;
}

const WIDTH = 880;
const HEIGHT = 560;
const M_LEFT = 76;
const M_RIGHT = 26;
const M_TOP = 28;
const M_BOTTOM = 58;
const BAND_ALPHA = 0.25;

const PALETTE: Rgb[] = [
  [31, 119, 180],
  [255, 127, 14],
  [44, 160, 44],
  [214, 39, 40],
  [148, 103, 189],
  [140, 86, 75],
  [227, 119, 194],
  [127, 127, 127],
];

export class BoundViolation extends Error {
  constructor(msg: string) {
    super(msg);
    this.name = "BoundViolation";
  }
}

/**
 * Reject any series whose mean (or mean + stderr) pokes above the bound.
 * For genuine lower-bound data this cannot fire: every per-rollout value
 * is capped, so the mean is capped, and the one-sided Samuelson bound
 * caps mean + stderr as well.  Firing means the inputs are not what the
 * caller claims.
 */
export function assertUnderBound(series: Series[], cap: number, tol = 1e-9): void {
  for (const s of series) {
    for (let i = 0; i < s.x.length; i++) {
      if (s.mean[i]! > cap + tol) {
        throw new BoundViolation(
          `series ${s.label}: mean ${s.mean[i]} at x=${s.x[i]} exceeds ln(L+1)=${cap}`,
        );
      }
      if (s.mean[i]! + s.stderr[i]! > cap + tol) {
        throw new BoundViolation(
          `series ${s.label}: band edge ${s.mean[i]! + s.stderr[i]!} at x=${s.x[i]} crosses ln(L+1)=${cap}`,
        );
      }
    }
  }
}

export function renderCumulative(spec: CumulativeSpec): Buffer {
  if (spec.inputs.length === 0) throw new Error("no input CSVs given");
  const rows = spec.inputs.flatMap(readRollouts);
  const series = cumulativeSeries(rows);
  const bound = spec.boundL === undefined ? undefined : Math.log(spec.boundL + 1);
  if (bound !== undefined) assertUnderBound(series, bound);
  return drawFigure(series, {
    xLabel: "experiment step",
    yLabel: "cumulative sPCE (nats)",
    bound,
    legend: true,
  });
}

export function renderTraining(spec: TrainingSpec): Buffer {
  if (spec.inputs.length === 0) throw new Error("no input CSVs given");
  const series = [trainingSeries(spec.inputs.map(readCurve))];
  const bound = Math.log(spec.boundL + 1);
  assertUnderBound(series, bound);
  return drawFigure(series, {
    xLabel: "iteration",
    yLabel: "sPCE at training L (nats)",
    bound,
    legend: false,
  });
}

export function plotCumulative(spec: CumulativeSpec): void {
  writeFileSync(spec.out, renderCumulative(spec));
}

export function plotTraining(spec: TrainingSpec): void {
  writeFileSync(spec.out, renderTraining(spec));
}

// ---------------------------------------------------------------------------
// layout

interface FigureOpts {
  xLabel: string;
  yLabel: string;
  bound?: number;
  legend: boolean;
}

function drawFigure(series: Series[], opts: FigureOpts): Buffer {
  const r = new Raster(WIDTH, HEIGHT);
  const x0 = M_LEFT;
  const x1 = WIDTH - M_RIGHT;
  const y0 = M_TOP;
  const y1 = HEIGHT - M_BOTTOM;

  let xLo = Infinity, xHi = -Infinity, yLo = Infinity, yHi = -Infinity;
  for (const s of series) {
    for (let i = 0; i < s.x.length; i++) {
      xLo = Math.min(xLo, s.x[i]!);
      xHi = Math.max(xHi, s.x[i]!);
      yLo = Math.min(yLo, s.mean[i]! - s.stderr[i]!);
      yHi = Math.max(yHi, s.mean[i]! + s.stderr[i]!);
    }
  }
  if (opts.bound !== undefined) yHi = Math.max(yHi, opts.bound);
  if (xLo === xHi) { xLo -= 1; xHi += 1; }
  if (yLo === yHi) { yLo -= 0.5; yHi += 0.5; }
  const yPad = 0.05 * (yHi - yLo);
  yLo -= yPad;
  yHi += yPad;

  const toX = (v: number) => Math.round(x0 + ((v - xLo) / (xHi - xLo)) * (x1 - x0));
  const toY = (v: number) => Math.round(y1 - ((v - yLo) / (yHi - yLo)) * (y1 - y0));

  // gridlines + ticks
  for (const t of niceTicks(xLo, xHi, 7)) {
    const px = toX(t.value);
    r.line(px, y0, px, y1, GRID_GRAY);
    r.line(px, y1, px, y1 + 4, AXIS_GRAY);
    r.text(px - Math.floor(textWidth(t.label, 2) / 2), y1 + 8, t.label, AXIS_GRAY, 2);
  }
  for (const t of niceTicks(yLo, yHi, 6)) {
    const py = toY(t.value);
    r.line(x0, py, x1, py, GRID_GRAY);
    r.line(x0 - 4, py, x0, py, AXIS_GRAY);
    r.text(x0 - 8 - textWidth(t.label, 2), py - 7, t.label, AXIS_GRAY, 2);
  }

  // bands first so every mean line stays on top
  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length]!;
    for (let i = 0; i + 1 < s.x.length; i++) {
      const xa = toX(s.x[i]!), xb = toX(s.x[i + 1]!);
      for (let px = xa; px <= xb; px++) {
        const f = xa === xb ? 0 : (px - xa) / (xb - xa);
        const lo = lerp(s.mean[i]! - s.stderr[i]!, s.mean[i + 1]! - s.stderr[i + 1]!, f);
        const hi = lerp(s.mean[i]! + s.stderr[i]!, s.mean[i + 1]! + s.stderr[i + 1]!, f);
        const pyHi = toY(hi), pyLo = toY(lo);
        for (let py = pyHi; py <= pyLo; py++) r.blend(px, py, color, BAND_ALPHA);
      }
    }
  });
  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length]!;
    for (let i = 0; i + 1 < s.x.length; i++) {
      r.line(toX(s.x[i]!), toY(s.mean[i]!), toX(s.x[i + 1]!), toY(s.mean[i + 1]!), color, 2);
    }
    if (s.x.length === 1) r.fillRect(toX(s.x[0]!) - 1, toY(s.mean[0]!) - 1, 3, 3, color);
  });

  if (opts.bound !== undefined) {
    const py = toY(opts.bound);
    r.dottedHLine(x0, x1, py, BLACK, 4, 4);
    const label = `ln(L+1) = ${formatTick(opts.bound, 0.001)}`;
    r.text(x1 - textWidth(label, 2) - 4, py - 18, label, BLACK, 2);
  }

  // frame over the grid
  r.line(x0, y0, x0, y1, AXIS_GRAY);
  r.line(x0, y1, x1, y1, AXIS_GRAY);

  r.text(
    Math.round((x0 + x1) / 2 - textWidth(opts.xLabel, 2) / 2),
    HEIGHT - 22, opts.xLabel, BLACK, 2,
  );
  // y label drawn horizontally above the axis; rotated text is not worth
  // the raster complexity at this size
  r.text(8, 8, opts.yLabel, BLACK, 2);

  if (opts.legend && series.length > 0) {
    const entryH = 18;
    const wMax = Math.max(...series.map((s) => textWidth(s.label, 2)));
    const boxW = wMax + 34;
    const boxH = series.length * entryH + 10;
    const bx = x1 - boxW - 8;
    const by = y0 + 8;
    r.fillRect(bx, by, boxW, boxH, [252, 252, 252]);
    r.line(bx, by, bx + boxW - 1, by, AXIS_GRAY);
    r.line(bx, by + boxH - 1, bx + boxW - 1, by + boxH - 1, AXIS_GRAY);
    r.line(bx, by, bx, by + boxH - 1, AXIS_GRAY);
    r.line(bx + boxW - 1, by, bx + boxW - 1, by + boxH - 1, AXIS_GRAY);
    series.forEach((s, si) => {
      const color = PALETTE[si % PALETTE.length]!;
      const ey = by + 6 + si * entryH;
      r.fillRect(bx + 6, ey + 3, 18, 6, color);
      r.text(bx + 30, ey, s.label, BLACK, 2);
    });
  }

  return r.toPng();
}

function lerp(a: number, b: number, f: number): number {
  return a + (b - a) * f;
}

interface Tick {
  value: number;
  label: string;
}

/** Ticks at 1/2/5 x 10^k spacing covering [lo, hi]. */
export function niceTicks(lo: number, hi: number, target: number): Tick[] {
  const span = hi - lo;
  const raw = span / Math.max(2, target);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  }
  const ticks: Tick[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    const value = Math.abs(v) < step * 1e-9 ? 0 : v;
    ticks.push({ value, label: formatTick(value, step) });
  }
  return ticks;
}

function formatTick(v: number, step: number): string {
  const decimals = Math.max(0, -Math.floor(Math.log10(step) + 1e-9));
  return v.toFixed(Math.min(decimals, 6));
}
