#!/usr/bin/env python3
"""Build a natural grayscale test corpus from the scikit-image sample photos.

Produces >= 20 PNG crops (8-bit grayscale) suitable for the benchmark
anchors. Needs scikit-image (test extra): pip install 'denoise-bench[test]'.

    python scripts/make_corpus.py --out data/clean [--size 160]
"""

import argparse
from pathlib import Path

import numpy as np
import skimage.data

from denoise_bench.core import LUMA_WEIGHTS, Image, round_half_away_from_zero, save_image

CROPS = {
    "camera": [(0, 0), (0, 352), (352, 0), (352, 352)],
    "moon": [(0, 0), (0, 352), (352, 0), (352, 352)],
    "astronaut": [(0, 0), (0, 352), (352, 0), (352, 352)],
    "coffee": [(120, 40), (120, 400)],
    "chelsea": [(60, 40), (60, 280)],
    "coins": [(80, 40), (80, 220)],
    "page": [(20, 40), (20, 220)],
    "text": [(6, 40), (6, 280)],
    "brick": [(0, 0), (352, 352)],
    "grass": [(0, 0), (352, 352)],
    "gravel": [(0, 0), (352, 352)],
}


def to_gray(arr):
    arr = arr.astype(np.float64)
    if arr.ndim == 3:
        arr = round_half_away_from_zero(arr @ np.asarray(LUMA_WEIGHTS))
    return round_half_away_from_zero(np.clip(arr, 0, 255))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="destination directory")
    parser.add_argument("--size", type=int, default=160, help="crop side length")
    args = parser.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for name, offsets in CROPS.items():
        gray = to_gray(getattr(skimage.data, name)())
        for r, c in offsets:
            crop = gray[r:r + args.size, c:c + args.size]
            if crop.shape != (args.size, args.size):
                raise SystemExit(f"{name}: crop at ({r},{c}) does not fit; use --size <= 160")
            save_image(Image(crop), out_dir / f"{name}_{r}_{c}.png")
            count += 1
    print(f"wrote {count} images to {out_dir}")


if __name__ == "__main__":
    main()
