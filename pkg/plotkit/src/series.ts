/**
 * Aggregation of raw rows into mean +- stderr series.
 *
 * stderr uses the n-1 divisor and is defined as 0 for a single sample,
 * matching how the harness pools rollout estimates.
 */

import type { CurveRow, RolloutRow } from "./csv.js";

export interface Series {
  label: string;
  x: number[];
  mean: number[];
  stderr: number[];
  n: number;
}

export function mean(xs: number[]): number {
  let s = 0;
  for (const v of xs) s += v;
  return s / xs.length;
}

export function stderr(xs: number[]): number {
  if (xs.length < 2) return 0;
  const m = mean(xs);
  let ss = 0;
  for (const v of xs) ss += (v - m) * (v - m);
  return Math.sqrt(ss / (xs.length - 1) / xs.length);
}

/**
 * One series per (algorithm, override) group: mean cumulative value per
 * step over that group's rollouts.  The override half of the label is
 * dropped when every row shares one override token.
 */
export function cumulativeSeries(rows: RolloutRow[]): Series[] {
  if (rows.length === 0) throw new Error("no rollout rows to aggregate");
  const overrides = new Set(rows.map((r) => r.override));
  const keyOf = (r: RolloutRow) =>
    overrides.size > 1 ? `${r.algorithm} ${r.override}` : r.algorithm;

  const groups = new Map<string, Map<number, number[]>>();
  for (const r of rows) {
    const key = keyOf(r);
    let byStep = groups.get(key);
    if (!byStep) {
      byStep = new Map();
      groups.set(key, byStep);
    }
    let vals = byStep.get(r.step);
    if (!vals) {
      vals = [];
      byStep.set(r.step, vals);
    }
    vals.push(r.cumulative);
  }

  const out: Series[] = [];
  for (const [label, byStep] of [...groups.entries()].sort((a, b) =>
    a[0] < b[0] ? -1 : a[0] > b[0] ? 1 : 0,
  )) {
    const steps = [...byStep.keys()].sort((a, b) => a - b);
    const counts = new Set(steps.map((s) => byStep.get(s)!.length));
    if (counts.size !== 1) {
      throw new Error(`group ${label}: rollouts disagree on step coverage`);
    }
    out.push({
      label,
      x: steps,
      mean: steps.map((s) => mean(byStep.get(s)!)),
      stderr: steps.map((s) => stderr(byStep.get(s)!)),
      n: [...counts][0]!,
    });
  }
  return out;
}

/**
 * Average several per-seed training curves pointwise.  All curves must
 * share one iteration grid; a band needs aligned samples to mean much.
 */
export function trainingSeries(curves: CurveRow[][]): Series {
  if (curves.length === 0) throw new Error("no curve inputs");
  const grid = curves[0]!.map((r) => r.iteration);
  for (const [i, curve] of curves.entries()) {
    const iters = curve.map((r) => r.iteration);
    if (iters.length !== grid.length || iters.some((v, j) => v !== grid[j])) {
      throw new Error(
        `curve input ${i + 1} has a different iteration grid than input 1`,
      );
    }
  }
  const cols = grid.map((_, j) => curves.map((c) => c[j]!.spce));
  return {
    label: "training",
    x: grid,
    mean: cols.map(mean),
    stderr: cols.map(stderr),
    n: curves.length,
  };
}
