import { describe, expect, it } from "vitest";

import { MaskGrid } from "../src/mask.js";

describe("MaskGrid", () => {
  it("starts empty", () => {
    const mask = new MaskGrid(64, 64);
    expect(mask.isEmpty()).toBe(true);
  });

  it("rejects invalid sizes and non-binary data", () => {
    expect(() => new MaskGrid(0, 64)).toThrow(RangeError);
    expect(() => new MaskGrid(8, 8, new Uint8Array(3))).toThrow(RangeError);
    const bad = new Uint8Array(64);
    bad[5] = 7;
    expect(() => new MaskGrid(8, 8, bad)).toThrow(RangeError);
  });

  it("brush paints a disc inside bounds", () => {
    const mask = new MaskGrid(32, 32);
    mask.paintBrush(16, 16, 3, 1);
    expect(mask.get(16, 16)).toBe(1);
    expect(mask.get(16, 13)).toBe(1); // within radius
    expect(mask.get(16, 12)).toBe(0); // outside radius
    expect(mask.isEmpty()).toBe(false);
  });

  it("brush near the edge stays in bounds", () => {
    const mask = new MaskGrid(16, 16);
    mask.paintBrush(0, 0, 5, 1);
    mask.paintBrush(15.5, 15.5, 5, 1);
    expect(mask.get(0, 0)).toBe(1);
    expect(mask.get(15, 15)).toBe(1);
  });

  it("default ellipse-pair stamp is symmetric and nonempty", () => {
    const mask = new MaskGrid(64, 64);
    mask.stampEllipsePair();
    expect(mask.isEmpty()).toBe(false);
    expect(mask.isHorizontallySymmetric()).toBe(true);
    // two lenses joined by a bridge: the stamp row through the centers is connected
    const cy = Math.floor(64 * 0.42);
    const row = [];
    for (let x = 0; x < 64; x++) row.push(mask.get(x, cy));
    const first = row.indexOf(1);
    const last = row.lastIndexOf(1);
    expect(row.slice(first, last + 1).every((v) => v === 1)).toBe(true);
  });

  it("draw-then-erase-all yields an empty mask", () => {
    const mask = new MaskGrid(32, 32);
    mask.stampEllipsePair();
    for (let y = 0; y < 32; y += 2) {
      for (let x = 0; x < 32; x += 2) {
        mask.paintBrush(x + 0.5, y + 0.5, 2, 0);
      }
    }
    expect(mask.isEmpty()).toBe(true);
  });

  it("clear empties and clone is independent", () => {
    const mask = new MaskGrid(16, 16);
    mask.paintBrush(8, 8, 4, 1);
    const copy = mask.clone();
    expect(copy.equals(mask)).toBe(true);
    mask.clear();
    expect(mask.isEmpty()).toBe(true);
    expect(copy.isEmpty()).toBe(false);
  });
});
