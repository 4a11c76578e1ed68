import { describe, expect, it } from "vitest";

import { boxBlur3, makeImage, quantize } from "../src/image.js";

function image(width: number, height: number, values: number[]) {
  return makeImage(width, height, Float64Array.from(values));
}

describe("quantize", () => {
  it("clips to [0, 255]", () => {
    const out = quantize(image(3, 1, [-12.3, 0.4, 260]));
    expect(Array.from(out.pixels)).toEqual([0, 0, 255]);
  });

  it("rounds halves away from zero", () => {
    const out = quantize(image(2, 1, [127.5, 0.5]));
    expect(Array.from(out.pixels)).toEqual([128, 1]);
  });

  it("is idempotent", () => {
    const once = quantize(image(4, 1, [3.2, 199.7, -5, 300]));
    const twice = quantize(once);
    expect(Array.from(twice.pixels)).toEqual(Array.from(once.pixels));
  });
});

describe("boxBlur3", () => {
  it("keeps constant images unchanged", () => {
    const constant = image(5, 4, new Array(20).fill(77));
    const out = boxBlur3(constant);
    expect(Array.from(out.pixels)).toEqual(new Array(20).fill(77));
  });

  it("spreads an impulse over its 3x3 neighborhood", () => {
    const values = new Array(25).fill(0);
    values[12] = 90; // center of a 5x5
    const out = boxBlur3(image(5, 5, values));
    expect(out.pixels[12]).toBeCloseTo(10, 12); // 90 / 9
    expect(out.pixels[6]).toBeCloseTo(10, 12);
    expect(out.pixels[0]).toBe(0); // outside the neighborhood
  });

  it("normalizes by the in-bounds count at corners", () => {
    const values = [40, 0, 0, 0]; // 2x2
    const out = boxBlur3(image(2, 2, values));
    expect(out.pixels[0]).toBeCloseTo(10, 12); // 40 / 4 neighbors
  });

  it("reduces impulse-noise MSE", () => {
    const size = 32;
    const clean = new Array(size * size).fill(0).map((_, i) => 100 + 50 * Math.sin(i / 7));
    const noisy = clean.slice();
    for (let i = 0; i < noisy.length; i += 11) noisy[i] = i % 22 === 0 ? 0 : 255;
    const blurred = boxBlur3(image(size, size, noisy));
    const mse = (a: ArrayLike<number>) => {
      let sum = 0;
      for (let i = 0; i < a.length; i++) sum += (a[i] - clean[i]) ** 2;
      return sum / a.length;
    };
    expect(mse(blurred.pixels)).toBeLessThan(mse(noisy));
  });
});

describe("makeImage", () => {
  it("rejects bad dimensions", () => {
    expect(() => makeImage(0, 4)).toThrow(/dimensions/);
    expect(() => image(3, 2, [1, 2, 3])).toThrow(/pixel count/);
  });
});
