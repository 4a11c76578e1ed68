/** Grayscale raster on the 8-bit scale, row-major. */
export interface GrayImage {
  width: number;
  height: number;
  /** Row-major intensities, length width * height. */
  pixels: Float64Array;
}

export function makeImage(width: number, height: number, pixels?: Float64Array): GrayImage {
  if (width < 1 || height < 1) {
    throw new Error(`image dimensions must be >= 1, got ${width}x${height}`);
  }
  const data = pixels ?? new Float64Array(width * height);
  if (data.length !== width * height) {
    throw new Error(`pixel count ${data.length} does not match ${width}x${height}`);
  }
  return { width, height, pixels: data };
}

/** Clip to [0, 255] and round half away from zero (128 from 127.5). */
export function quantize(img: GrayImage): GrayImage {
  const out = new Float64Array(img.pixels.length);
  for (let i = 0; i < out.length; i++) {
    const v = Math.min(255, Math.max(0, img.pixels[i]));
    out[i] = Math.floor(v + 0.5); // non-negative after the clip
  }
  return makeImage(img.width, img.height, out);
}

/** 3x3 box filter; borders average the in-bounds neighbors only, so
 *  constant images pass through unchanged. */
export function boxBlur3(img: GrayImage): GrayImage {
  const { width, height, pixels } = img;
  const out = new Float64Array(pixels.length);
  for (let row = 0; row < height; row++) {
    for (let col = 0; col < width; col++) {
      let sum = 0;
      let count = 0;
      for (let dr = -1; dr <= 1; dr++) {
        const r = row + dr;
        if (r < 0 || r >= height) continue;
        for (let dc = -1; dc <= 1; dc++) {
          const c = col + dc;
          if (c < 0 || c >= width) continue;
          sum += pixels[r * width + c];
          count++;
        }
      }
      out[row * width + col] = sum / count;
    }
  }
  return makeImage(width, height, out);
}
