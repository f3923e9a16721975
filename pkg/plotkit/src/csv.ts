/**
 * CSV ingestion for the two harness outputs this package consumes:
 * per-step rollout rows and training-curve rows.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export interface RolloutRow {
  algorithm: string;
  override: string;
  rolloutId: number;
  step: number;
  cumulative: number;
}

export interface CurveRow {
  iteration: number;
  spce: number;
}

export class MissingColumnsError extends Error {
  constructor(path: string, missing: string[]) {
    super(`${path}: missing required column(s): ${missing.join(", ")}`);
    this.name = "MissingColumnsError";
  }
}

function parseTable(path: string): { header: string[]; rows: Record<string, string>[] } {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const fatal = parsed.errors.filter((e) => e.code !== "TooFewFields");
  if (fatal.length > 0) {
    throw new Error(`${path}: CSV parse failed: ${fatal[0]!.message}`);
  }
  return { header: parsed.meta.fields ?? [], rows: parsed.data };
}

function requireColumns(path: string, header: string[], wanted: string[]): void {
  const missing = wanted.filter((c) => !header.includes(c));
  if (missing.length > 0) throw new MissingColumnsError(path, missing);
}

function num(path: string, row: Record<string, string>, col: string, line: number): number {
  const v = Number(row[col]);
  if (!Number.isFinite(v)) {
    throw new Error(`${path}: row ${line}: column ${col} is not a finite number (${row[col]})`);
  }
  return v;
}

/**
 * Read per-step rollout rows.  `algorithm` and `override` label columns
 * are optional in the file; absent ones collapse to a single group.
 */
export function readRollouts(path: string): RolloutRow[] {
  const { header, rows } = parseTable(path);
  requireColumns(path, header, ["rollout_id", "step", "cumulative_reward"]);
  const hasAlgo = header.includes("algorithm");
  const hasOverride = header.includes("override");
  return rows.map((r, i) => ({
    algorithm: hasAlgo ? (r["algorithm"] ?? "") : "agent",
    override: hasOverride ? (r["override"] ?? "") : "none",
    rolloutId: num(path, r, "rollout_id", i + 2),
    step: num(path, r, "step", i + 2),
    cumulative: num(path, r, "cumulative_reward", i + 2),
  }));
}

/** Read one training curve (iteration, lower bound at training L). */
export function readCurve(path: string): CurveRow[] {
  const { header, rows } = parseTable(path);
  requireColumns(path, header, ["iteration", "spce_train_L"]);
  if (rows.length === 0) {
    throw new Error(`${path}: curve file has a header but no data rows`);
  }
  return rows.map((r, i) => ({
    iteration: num(path, r, "iteration", i + 2),
    spce: num(path, r, "spce_train_L", i + 2),
  }));
}
