"""Image model, quantization, and lossless grayscale I/O.

Images are immutable single-channel rasters of real-valued intensities on
the 8-bit scale [0, 255]. Quantization (clip to [0, 255], then round
half-away-from-zero) is always an explicit step; nothing quantizes
implicitly. Rounding is half-away-from-zero everywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

if TYPE_CHECKING:
    from .noise import NoiseSpec

#: ITU-R BT.601 luminance weights for R, G, B.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

#: Lossless raster formats accepted for image I/O (Pillow format names).
_SUPPORTED_FORMATS = ("PNG", "PPM")
_SUPPORTED_SUFFIXES = (".png", ".pgm")


class ImageFormatError(ValueError):
    """File is not a supported lossless grayscale raster."""


class UnquantizedImageError(ValueError):
    """Image holds intensities outside {0, 1, ..., 255}."""


def round_half_away_from_zero(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer, halves away from zero (so 127.5 -> 128)."""
    values = np.asarray(values, dtype=np.float64)
    return np.floor(np.abs(values) + 0.5) * np.sign(values) + 0.0


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable grayscale raster; `pixels` is float64 with shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"pixels must be 2-D (height, width), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("pixels must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def is_quantized(self) -> bool:
        p = self.pixels
        return bool((p >= 0).all() and (p <= 255).all() and (p == np.floor(p)).all())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self) -> str:
        return f"Image({self.width}x{self.height})"


def quantize(img: Image) -> Image:
    """Clip to [0, 255] and round half-away-from-zero; idempotent."""
    return Image(round_half_away_from_zero(np.clip(img.pixels, 0.0, 255.0)))


def load_image(path) -> Image:
    """Load a lossless raster as a quantized grayscale Image.

    Multi-channel inputs are reduced to luminance with the BT.601 weights
    and rounded half-away-from-zero. Only 8-bit PNG and PGM are accepted.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing file: {path}")
    try:
        with PILImage.open(path) as im:
            im.load()
            fmt = im.format
            mode = im.mode
            if fmt not in _SUPPORTED_FORMATS:
                raise ImageFormatError(f"{path}: unsupported format {fmt!r} (need PNG or PGM)")
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise ImageFormatError(f"{path}: unsupported bit depth (mode {mode!r}); 8-bit only")
            if im.width < 1 or im.height < 1:
                raise ImageFormatError(f"{path}: zero-dimension image")
            if mode == "L":
                arr = np.asarray(im, dtype=np.float64)
            elif mode == "1":
                arr = np.asarray(im.convert("L"), dtype=np.float64)
            else:
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                arr = round_half_away_from_zero(rgb @ np.asarray(LUMA_WEIGHTS))
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a decodable raster ({exc})") from exc
    except OSError as exc:
        raise ImageFormatError(f"{path}: corrupt file ({exc})") from exc
    return Image(arr)


def save_image(img: Image, path) -> None:
    """Write a quantized Image losslessly; `load_image(path) == img` afterwards.

    Raises UnquantizedImageError rather than silently quantizing.
    """
    path = Path(path)
    if path.suffix.lower() not in _SUPPORTED_SUFFIXES:
        raise ImageFormatError(f"{path}: unsupported suffix (need .png or .pgm)")
    if not img.is_quantized():
        bad = img.pixels[(img.pixels < 0) | (img.pixels > 255) | (img.pixels != np.floor(img.pixels))]
        raise UnquantizedImageError(
            f"image is unquantized (e.g. value {bad.flat[0]!r}); call quantize() first"
        )
    out = PILImage.fromarray(img.pixels.astype(np.uint8), mode="L")
    out.save(path)


@dataclass(frozen=True)
class DatasetManifest:
    """A named corpus: clean images plus a NoiseSpec, or paired clean/noisy dirs.

    `test_count` limits evaluation to the first N image ids in lexicographic
    order; None means the whole corpus.
    """

    name: str
    kind: str  # "synthetic" | "paired"
    clean_dir: Path
    noisy_dir: Path | None = None
    noise: "NoiseSpec | None" = None
    test_count: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "clean_dir", Path(self.clean_dir))
        if self.noisy_dir is not None:
            object.__setattr__(self, "noisy_dir", Path(self.noisy_dir))
        if self.kind == "synthetic":
            if self.noise is None:
                raise ValueError(f"dataset {self.name!r}: synthetic kind requires a noise spec")
            if self.noisy_dir is not None:
                raise ValueError(f"dataset {self.name!r}: synthetic kind takes no noisy_dir")
        elif self.kind == "paired":
            if self.noisy_dir is None:
                raise ValueError(f"dataset {self.name!r}: paired kind requires noisy_dir")
            if self.noise is not None:
                raise ValueError(f"dataset {self.name!r}: paired kind takes no noise spec")
        else:
            raise ValueError(f"dataset {self.name!r}: unknown kind {self.kind!r}")
        if self.test_count is not None and self.test_count < 1:
            raise ValueError(f"dataset {self.name!r}: test_count must be >= 1")


@dataclass(frozen=True)
class EvaluationRecord:
    """One (method, dataset, image) result."""

    method: str
    dataset: str
    image_id: str
    psnr_db: float  # +inf sentinel when the reconstruction is exact
    ssim: float | None
    wall_time: float
    output_path: str


def list_corpus(directory) -> list[tuple[str, Path]]:
    """Sorted (image_id, path) pairs for the rasters in a corpus directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    entries: dict[str, Path] = {}
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() in _SUPPORTED_SUFFIXES and p.is_file():
            if p.stem in entries:
                raise ValueError(f"duplicate image id {p.stem!r} in {directory}")
            entries[p.stem] = p
    return sorted(entries.items())
