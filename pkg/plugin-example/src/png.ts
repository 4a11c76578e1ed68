import * as fs from "fs";
import { PNG } from "pngjs";

import { GrayImage, makeImage } from "./image.js";

/** Decode an 8-bit PNG as grayscale (the protocol inputs are grayscale,
 *  so the red channel carries the intensity). */
export function readGrayPng(path: string): GrayImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const pixels = new Float64Array(png.width * png.height);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = png.data[i * 4];
  }
  return makeImage(png.width, png.height, pixels);
}

/** Encode a quantized grayscale image as an 8-bit grayscale PNG. */
export function writeGrayPng(path: string, img: GrayImage): void {
  const png = new PNG({ width: img.width, height: img.height, colorType: 0 });
  for (let i = 0; i < img.pixels.length; i++) {
    const v = img.pixels[i];
    if (!Number.isInteger(v) || v < 0 || v > 255) {
      throw new Error(`unquantized intensity ${v} at index ${i}`);
    }
    png.data[i * 4] = v;
    png.data[i * 4 + 1] = v;
    png.data[i * 4 + 2] = v;
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 0 }));
}
