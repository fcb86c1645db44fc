/** Grayscale PNG codec for binary masks.
 *
 * Masks travel to the server as single-channel 8-bit PNGs with values in
 * {0, 255}. Encoding and decoding use the platform CompressionStream /
 * DecompressionStream ("deflate" = zlib), available in browsers and Node 18+,
 * so the same code runs in the app and in tests.
 */

import { MaskGrid } from "./mask.js";

const PNG_MAGIC = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

export class PngFormatError extends Error {}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...parts: Uint8Array[]): number {
  let c = 0xffffffff;
  for (const part of parts) {
    for (const byte of part) c = CRC_TABLE[(c ^ byte) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function u32be(value: number): Uint8Array {
  return new Uint8Array([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
}

function ascii(s: string): Uint8Array {
  return new Uint8Array([...s].map((ch) => ch.charCodeAt(0)));
}

function concat(parts: Uint8Array[]): Uint8Array {
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let offset = 0;
  for (const p of parts) {
    out.set(p, offset);
    offset += p.length;
  }
  return out;
}

function chunk(type: string, body: Uint8Array): Uint8Array {
  const name = ascii(type);
  return concat([u32be(body.length), name, body, u32be(crc32(name, body))]);
}

async function pipe(data: Uint8Array, stream: CompressionStream | DecompressionStream): Promise<Uint8Array> {
  const writer = stream.writable.getWriter();
  void writer.write(data.slice());
  void writer.close();
  const parts: Uint8Array[] = [];
  const reader = stream.readable.getReader();
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    parts.push(new Uint8Array(value));
  }
  return concat(parts);
}

/** MaskGrid -> single-channel 8-bit PNG with pixel values in {0, 255}. */
export async function encodeMaskPng(mask: MaskGrid): Promise<Uint8Array> {
  const raw = new Uint8Array((mask.width + 1) * mask.height);
  for (let y = 0; y < mask.height; y++) {
    const row = y * (mask.width + 1);
    raw[row] = 0; // filter: None
    for (let x = 0; x < mask.width; x++) {
      raw[row + 1 + x] = mask.get(x, y) ? 255 : 0;
    }
  }
  const idat = await pipe(raw, new CompressionStream("deflate"));
  const ihdr = concat([
    u32be(mask.width),
    u32be(mask.height),
    new Uint8Array([8, 0, 0, 0, 0]), // 8-bit, grayscale, deflate, adaptive, no interlace
  ]);
  return concat([new Uint8Array(PNG_MAGIC), chunk("IHDR", ihdr), chunk("IDAT", idat), chunk("IEND", new Uint8Array(0))]);
}

function readU32(bytes: Uint8Array, at: number): number {
  return ((bytes[at] << 24) | (bytes[at + 1] << 16) | (bytes[at + 2] << 8) | bytes[at + 3]) >>> 0;
}

function unfilter(raw: Uint8Array, width: number, height: number): Uint8Array {
  // bytes-per-pixel 1 (grayscale); standard filters 0..4
  const out = new Uint8Array(width * height);
  const stride = width + 1;
  for (let y = 0; y < height; y++) {
    const filter = raw[y * stride];
    for (let x = 0; x < width; x++) {
      const cur = raw[y * stride + 1 + x];
      const left = x > 0 ? out[y * width + x - 1] : 0;
      const up = y > 0 ? out[(y - 1) * width + x] : 0;
      const upLeft = x > 0 && y > 0 ? out[(y - 1) * width + x - 1] : 0;
      let value: number;
      switch (filter) {
        case 0:
          value = cur;
          break;
        case 1:
          value = cur + left;
          break;
        case 2:
          value = cur + up;
          break;
        case 3:
          value = cur + Math.floor((left + up) / 2);
          break;
        case 4: {
          const p = left + up - upLeft;
          const pa = Math.abs(p - left);
          const pb = Math.abs(p - up);
          const pc = Math.abs(p - upLeft);
          value = cur + (pa <= pb && pa <= pc ? left : pb <= pc ? up : upLeft);
          break;
        }
        default:
          throw new PngFormatError(`unsupported scanline filter ${filter}`);
      }
      out[y * width + x] = value & 0xff;
    }
  }
  return out;
}

/** Single-channel 8-bit PNG with values in {0, 255} -> MaskGrid. */
export async function decodeMaskPng(bytes: Uint8Array): Promise<MaskGrid> {
  if (bytes.length < 8 || PNG_MAGIC.some((b, i) => bytes[i] !== b)) {
    throw new PngFormatError("not a PNG file");
  }
  let at = 8;
  let width = 0;
  let height = 0;
  const idats: Uint8Array[] = [];
  while (at + 8 <= bytes.length) {
    const length = readU32(bytes, at);
    const type = String.fromCharCode(...bytes.slice(at + 4, at + 8));
    const body = bytes.slice(at + 8, at + 8 + length);
    if (type === "IHDR") {
      width = readU32(body, 0);
      height = readU32(body, 4);
      const [bitDepth, colorType] = [body[8], body[9]];
      if (bitDepth !== 8 || colorType !== 0) {
        throw new PngFormatError(`expected 8-bit grayscale, got depth=${bitDepth} color=${colorType}`);
      }
    } else if (type === "IDAT") {
      idats.push(body);
    } else if (type === "IEND") {
      break;
    }
    at += 12 + length;
  }
  if (width === 0 || idats.length === 0) throw new PngFormatError("missing IHDR or IDAT");
  const raw = await pipe(concat(idats), new DecompressionStream("deflate"));
  if (raw.length !== (width + 1) * height) {
    throw new PngFormatError(`decompressed size ${raw.length} != ${(width + 1) * height}`);
  }
  const pixels = unfilter(raw, width, height);
  const data = new Uint8Array(width * height);
  for (let i = 0; i < pixels.length; i++) {
    if (pixels[i] !== 0 && pixels[i] !== 255) {
      throw new PngFormatError(`mask pixel must be 0 or 255, got ${pixels[i]}`);
    }
    data[i] = pixels[i] === 255 ? 1 : 0;
  }
  return new MaskGrid(width, height, data);
}

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  for (const b of bytes) binary += String.fromCharCode(b);
  return btoa(binary);
}

export function base64ToBytes(b64: string): Uint8Array {
  const binary = atob(b64);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}
