import { describe, expect, it } from "vitest";

import { MaskGrid } from "../src/mask.js";
import {
  PngFormatError,
  base64ToBytes,
  bytesToBase64,
  decodeMaskPng,
  encodeMaskPng,
} from "../src/png.js";

function randomMask(width: number, height: number, seed: number): MaskGrid {
  // deterministic LCG so failures are reproducible
  let state = seed >>> 0;
  const next = () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
  const data = new Uint8Array(width * height);
  for (let i = 0; i < data.length; i++) data[i] = next() < 0.3 ? 1 : 0;
  return new MaskGrid(width, height, data);
}

describe("mask PNG codec", () => {
  it("round-trips random masks pixel-identically", async () => {
    for (const seed of [1, 2, 3]) {
      const mask = randomMask(64, 64, seed);
      const decoded = await decodeMaskPng(await encodeMaskPng(mask));
      expect(decoded.equals(mask)).toBe(true);
    }
  });

  it("round-trips the ellipse-pair stamp and the empty mask", async () => {
    const stamp = new MaskGrid(64, 64);
    stamp.stampEllipsePair();
    expect((await decodeMaskPng(await encodeMaskPng(stamp))).equals(stamp)).toBe(true);
    const empty = new MaskGrid(64, 64);
    expect((await decodeMaskPng(await encodeMaskPng(empty))).equals(empty)).toBe(true);
  });

  it("exported PNG decodes to exactly {0, 255} pixels", async () => {
    const mask = randomMask(32, 32, 9);
    const bytes = await encodeMaskPng(mask);
    const decoded = await decodeMaskPng(bytes); // decoder enforces {0, 255}
    expect(decoded.data.every((v) => v === 0 || v === 1)).toBe(true);
  });

  it("survives a base64 transport round trip", async () => {
    const mask = randomMask(64, 64, 4);
    const b64 = bytesToBase64(await encodeMaskPng(mask));
    const decoded = await decodeMaskPng(base64ToBytes(b64));
    expect(decoded.equals(mask)).toBe(true);
  });

  it("rejects non-PNG bytes", async () => {
    await expect(decodeMaskPng(new Uint8Array([1, 2, 3]))).rejects.toThrow(PngFormatError);
  });

  it("rejects gray (non-binary) pixel values", async () => {
    const mask = new MaskGrid(8, 8);
    const bytes = await encodeMaskPng(mask);
    // rebuild with a tampered IDAT: flip one payload byte post-compression is
    // unreliable, so encode a 100-valued pixel through a hand-built raw stream
    const raw = new Uint8Array(9 * 8);
    raw.fill(0);
    raw[1] = 100;
    const stream = new CompressionStream("deflate");
    const writer = stream.writable.getWriter();
    void writer.write(raw);
    void writer.close();
    const chunks: Uint8Array[] = [];
    const reader = stream.readable.getReader();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      chunks.push(new Uint8Array(value));
    }
    const idat = new Uint8Array(chunks.reduce((n, c) => n + c.length, 0));
    let at = 0;
    for (const c of chunks) {
      idat.set(c, at);
      at += c.length;
    }
    // splice the tampered IDAT into the valid container
    const out: number[] = [...bytes.slice(0, 8)];
    let pos = 8;
    while (pos < bytes.length) {
      const length = (bytes[pos] << 24) | (bytes[pos + 1] << 16) | (bytes[pos + 2] << 8) | bytes[pos + 3];
      const type = String.fromCharCode(...bytes.slice(pos + 4, pos + 8));
      if (type === "IDAT") {
        out.push((idat.length >>> 24) & 0xff, (idat.length >>> 16) & 0xff, (idat.length >>> 8) & 0xff, idat.length & 0xff);
        out.push(...bytes.slice(pos + 4, pos + 8), ...idat, 0, 0, 0, 0); // CRC unchecked by decoder
      } else {
        out.push(...bytes.slice(pos, pos + 12 + length));
      }
      pos += 12 + length;
    }
    await expect(decodeMaskPng(new Uint8Array(out))).rejects.toThrow(/0 or 255/);
  });
});
