import { mkdtempSync, writeFileSync } from "node:fs";
import { inflateSync } from "node:zlib";
import { tmpdir } from "node:os";
import { join } from "node:path";

export function tempDir(): string {
  return mkdtempSync(join(tmpdir(), "plotkit-"));
}

export interface FakeRollout {
  algorithm: string;
  override?: string;
  rolloutId: number;
  /** cumulative value per step, step numbers are 1-based */
  cumulative: number[];
}

/** Write a rollouts.csv shaped like the harness output. */
export function writeRollouts(path: string, rollouts: FakeRollout[]): void {
  const lines = [
    "algorithm,override,rollout_id,seed,step,design_0,design_1,outcome,reward,cumulative_reward",
  ];
  for (const r of rollouts) {
    let prev = 0;
    r.cumulative.forEach((c, i) => {
      lines.push(
        [
          r.algorithm,
          r.override ?? "none",
          r.rolloutId,
          7,
          i + 1,
          0.1,
          -0.2,
          0.3,
          c - prev,
          c,
        ].join(","),
      );
      prev = c;
    });
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export function writeCurve(path: string, rows: Array<[number, number]>): void {
  const lines = ["iteration,spce_train_L,critic_loss,actor_loss,alpha"];
  for (const [it, spce] of rows) {
    lines.push(`${it},${spce},1.0,-2.0,0.5`);
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export interface DecodedPng {
  width: number;
  height: number;
  /** packed RGB, 3 bytes per pixel, row-major */
  px: Buffer;
}

function check(cond: boolean, msg: string): asserts cond {
  if (!cond) throw new Error(`bad PNG: ${msg}`);
}

/** Minimal reader for the PNGs this package writes (8-bit RGB, filter 0). */
export function decodePng(buf: Buffer): DecodedPng {
  const sig = Buffer.from([137, 80, 78, 71, 13, 10, 26, 10]);
  check(buf.subarray(0, 8).equals(sig), "signature");
  let off = 8;
  let width = 0;
  let height = 0;
  const idat: Buffer[] = [];
  while (off < buf.length) {
    const len = buf.readUInt32BE(off);
    const type = buf.toString("latin1", off + 4, off + 8);
    const data = buf.subarray(off + 8, off + 8 + len);
    if (type === "IHDR") {
      width = data.readUInt32BE(0);
      height = data.readUInt32BE(4);
      check(data[8] === 8, "bit depth");
      check(data[9] === 2, "color type");
    } else if (type === "IDAT") {
      idat.push(data);
    }
    off += 12 + len;
  }
  const raw = inflateSync(Buffer.concat(idat));
  const stride = width * 3;
  check(raw.length === height * (stride + 1), "decompressed size");
  const px = Buffer.alloc(width * height * 3);
  for (let y = 0; y < height; y++) {
    check(raw[y * (stride + 1)] === 0, `filter byte, row ${y}`);
    raw.copy(px, y * stride, y * (stride + 1) + 1, (y + 1) * (stride + 1));
  }
  return { width, height, px };
}
