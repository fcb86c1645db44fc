/** Binary mask model: a width x height grid of {0, 1} values.
 *
 * All editing tools (brush, eraser, ellipse-pair stamp, clear) mutate this
 * grid; rendering and PNG export are derived views, so a round trip through
 * export/import is lossless by construction.
 */

export class MaskGrid {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, data?: Uint8Array) {
    if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
      throw new RangeError(`invalid mask size ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    if (data !== undefined) {
      if (data.length !== width * height) {
        throw new RangeError(`data length ${data.length} != ${width * height}`);
      }
      for (const v of data) {
        if (v !== 0 && v !== 1) {
          throw new RangeError(`mask values must be 0 or 1, got ${v}`);
        }
      }
      this.data = Uint8Array.from(data);
    } else {
      this.data = new Uint8Array(width * height);
    }
  }

  clone(): MaskGrid {
    return new MaskGrid(this.width, this.height, this.data);
  }

  equals(other: MaskGrid): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    return this.data.every((v, i) => v === other.data[i]);
  }

  isEmpty(): boolean {
    return this.data.every((v) => v === 0);
  }

  get(x: number, y: number): number {
    return this.data[y * this.width + x];
  }

  clear(): void {
    this.data.fill(0);
  }

  /** Circular brush; value 1 paints, value 0 erases. */
  paintBrush(cx: number, cy: number, radius: number, value: 0 | 1): void {
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x + 0.5 - cx;
        const dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= r2) this.data[y * this.width + x] = value;
      }
    }
  }

  /** Two lenses plus a connecting bridge bar, mirror-symmetric about cx. */
  stampEllipsePair(opts?: {
    cx?: number;
    cy?: number;
    rx?: number;
    ry?: number;
    separation?: number;
    bridgeHalfHeight?: number;
  }): void {
    const cx = opts?.cx ?? this.width / 2;
    const cy = opts?.cy ?? this.height * 0.42;
    const rx = opts?.rx ?? this.width * 0.145;
    const ry = opts?.ry ?? this.width * 0.116;
    const half = (opts?.separation ?? this.width * 0.23) / 2;
    const bridge = opts?.bridgeHalfHeight ?? this.height * 0.022;
    for (let y = 0; y < this.height; y++) {
      for (let x = 0; x < this.width; x++) {
        const px = x + 0.5;
        const py = y + 0.5;
        let inside = false;
        for (const side of [-1, 1]) {
          const dx = (px - (cx + side * half)) / rx;
          const dy = (py - cy) / ry;
          if (dx * dx + dy * dy < 1) inside = true;
        }
        if (Math.abs(px - cx) < half && Math.abs(py - cy) < bridge) inside = true;
        if (inside) this.data[y * this.width + x] = 1;
      }
    }
  }

  /** True when the mask is mirror-symmetric about the vertical center line. */
  isHorizontallySymmetric(): boolean {
    for (let y = 0; y < this.height; y++) {
      for (let x = 0; x < this.width; x++) {
        if (this.get(x, y) !== this.get(this.width - 1 - x, y)) return false;
      }
    }
    return true;
  }
}
