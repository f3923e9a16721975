/**
 * Minimal deterministic RGB rasterizer with PNG output.
 *
 * Every scanline is emitted with filter type 0 and compressed at a fixed
 * zlib level, so identical draw calls produce identical bytes; nothing
 * here reads the clock or the environment.
 */

import { deflateSync, crc32 } from "node:zlib";
import { GLYPH_H, GLYPH_W, glyphRows } from "./font.js";

export type Rgb = readonly [number, number, number];

export const WHITE: Rgb = [255, 255, 255];
export const BLACK: Rgb = [0, 0, 0];
export const GRID_GRAY: Rgb = [225, 225, 225];
export const AXIS_GRAY: Rgb = [80, 80, 80];

export class Raster {
  readonly width: number;
  readonly height: number;
  private readonly px: Uint8Array;

  constructor(width: number, height: number, background: Rgb = WHITE) {
    if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
      throw new Error(`raster dimensions must be positive integers, got ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.px = new Uint8Array(width * height * 3);
    this.fillRect(0, 0, width, height, background);
  }

  set(x: number, y: number, c: Rgb): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 3;
    this.px[i] = c[0];
    this.px[i + 1] = c[1];
    this.px[i + 2] = c[2];
  }

  get(x: number, y: number): Rgb {
    const i = (y * this.width + x) * 3;
    return [this.px[i]!, this.px[i + 1]!, this.px[i + 2]!];
  }

  /** Alpha-composite `c` over the existing pixel. */
  blend(x: number, y: number, c: Rgb, alpha: number): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 3;
    this.px[i] = Math.round(this.px[i]! * (1 - alpha) + c[0] * alpha);
    this.px[i + 1] = Math.round(this.px[i + 1]! * (1 - alpha) + c[1] * alpha);
    this.px[i + 2] = Math.round(this.px[i + 2]! * (1 - alpha) + c[2] * alpha);
  }

  fillRect(x0: number, y0: number, w: number, h: number, c: Rgb): void {
    const x1 = Math.min(this.width, x0 + w);
    const y1 = Math.min(this.height, y0 + h);
    for (let y = Math.max(0, y0); y < y1; y++) {
      for (let x = Math.max(0, x0); x < x1; x++) this.set(x, y, c);
    }
  }

  blendRect(x0: number, y0: number, w: number, h: number, c: Rgb, alpha: number): void {
    const x1 = Math.min(this.width, x0 + w);
    const y1 = Math.min(this.height, y0 + h);
    for (let y = Math.max(0, y0); y < y1; y++) {
      for (let x = Math.max(0, x0); x < x1; x++) this.blend(x, y, c, alpha);
    }
  }

  /** Bresenham segment, inclusive endpoints; `thick` widens symmetrically. */
  line(x0: number, y0: number, x1: number, y1: number, c: Rgb, thick = 1): void {
    x0 = Math.round(x0); y0 = Math.round(y0);
    x1 = Math.round(x1); y1 = Math.round(y1);
    const dx = Math.abs(x1 - x0);
    const dy = -Math.abs(y1 - y0);
    const sx = x0 < x1 ? 1 : -1;
    const sy = y0 < y1 ? 1 : -1;
    let err = dx + dy;
    const r = Math.floor(thick / 2);
    for (;;) {
      if (thick === 1) this.set(x0, y0, c);
      else this.fillRect(x0 - r, y0 - r, thick, thick, c);
      if (x0 === x1 && y0 === y1) break;
      const e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  /** Horizontal dotted line: `on` inked pixels, `off` skipped, repeating. */
  dottedHLine(x0: number, x1: number, y: number, c: Rgb, on = 3, off = 3): void {
    const period = on + off;
    const lo = Math.min(x0, x1);
    const hi = Math.max(x0, x1);
    for (let x = lo; x <= hi; x++) {
      if ((x - lo) % period < on) this.set(x, y, c);
    }
  }

  text(x: number, y: number, s: string, c: Rgb, scale = 1): void {
    let cx = x;
    for (const ch of s) {
      const rows = glyphRows(ch);
      for (let gy = 0; gy < GLYPH_H; gy++) {
        const bits = rows[gy]!;
        for (let gx = 0; gx < GLYPH_W; gx++) {
          if (bits & (1 << (GLYPH_W - 1 - gx))) {
            this.fillRect(cx + gx * scale, y + gy * scale, scale, scale, c);
          }
        }
      }
      cx += (GLYPH_W + 1) * scale;
    }
  }

  /** Encode as an 8-bit RGB PNG (filter 0 scanlines, fixed zlib level). */
  toPng(): Buffer {
    const stride = this.width * 3;
    const raw = Buffer.alloc((stride + 1) * this.height);
    for (let y = 0; y < this.height; y++) {
      raw[y * (stride + 1)] = 0; // filter type 0
      raw.set(this.px.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
    }
    const ihdr = Buffer.alloc(13);
    ihdr.writeUInt32BE(this.width, 0);
    ihdr.writeUInt32BE(this.height, 4);
    ihdr[8] = 8;  // bit depth
    ihdr[9] = 2;  // color type: truecolor
    ihdr[10] = 0; // compression
    ihdr[11] = 0; // filter method
    ihdr[12] = 0; // no interlace
    const idat = deflateSync(raw, { level: 9 });
    return Buffer.concat([
      Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
      chunk("IHDR", ihdr),
      chunk("IDAT", idat),
      chunk("IEND", Buffer.alloc(0)),
    ]);
  }
}

function chunk(type: string, data: Buffer): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32BE(data.length, 0);
  const body = Buffer.concat([Buffer.from(type, "ascii"), data]);
  const tail = Buffer.alloc(4);
  tail.writeUInt32BE(crc32(body) >>> 0, 0);
  return Buffer.concat([head, body, tail]);
}
