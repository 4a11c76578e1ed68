import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { makeImage, quantize } from "../src/image.js";
import { readGrayPng, writeGrayPng } from "../src/png.js";

const FIXTURES = path.join(__dirname, "fixtures");

function tmpFile(name: string): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "plugin-example-"));
  return path.join(dir, name);
}

describe("png codec", () => {
  it("round-trips random pixels losslessly", () => {
    const pixels = Float64Array.from({ length: 30 * 22 }, (_, i) => (i * 37 + 11) % 256);
    const img = makeImage(30, 22, pixels);
    const file = tmpFile("roundtrip.png");
    writeGrayPng(file, img);
    const back = readGrayPng(file);
    expect(back.width).toBe(30);
    expect(back.height).toBe(22);
    expect(Array.from(back.pixels)).toEqual(Array.from(pixels));
  });

  it("decodes externally written grayscale PNGs exactly", () => {
    for (const name of ["ramp", "random"]) {
      const expected = JSON.parse(
        fs.readFileSync(path.join(FIXTURES, `${name}.json`), "utf-8"),
      );
      const img = readGrayPng(path.join(FIXTURES, `${name}.png`));
      expect(img.width).toBe(expected.width);
      expect(img.height).toBe(expected.height);
      expect(Array.from(img.pixels)).toEqual(expected.pixels);
    }
  });

  it("re-encodes an external file to identical pixels", () => {
    const original = readGrayPng(path.join(FIXTURES, "random.png"));
    const file = tmpFile("reencoded.png");
    writeGrayPng(file, quantize(original));
    expect(Array.from(readGrayPng(file).pixels)).toEqual(Array.from(original.pixels));
  });

  it("refuses to encode unquantized intensities", () => {
    const img = makeImage(2, 1, Float64Array.from([13.7, 0]));
    expect(() => writeGrayPng(tmpFile("bad.png"), img)).toThrow(/unquantized/);
  });
});
