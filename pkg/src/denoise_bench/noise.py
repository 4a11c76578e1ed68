"""Seeded, reproducible corruption operators: AWGN, salt-and-pepper, mixture.

All operators are pure functions of (image, parameters, stream seed); the
per-pixel randomness is counter-based (see `rng`), so results are identical
for any traversal order or worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .core import DatasetManifest, Image, list_corpus, load_image, quantize
from .rng import derive_seed, shuffle_prefix, standard_normals

log = logging.getLogger(__name__)

VARIANTS = ("gaussian", "salt_pepper", "mixture")

#: Accepted spellings in the CLI noise grammar.
_VARIANT_ALIASES = {"gaussian": "gaussian", "sp": "salt_pepper", "salt_pepper": "salt_pepper", "mixture": "mixture"}


@dataclass(frozen=True)
class NoiseSpec:
    """Declarative corruption pipeline: variant, parameters, master seed."""

    variant: str
    sigma: float = 0.0
    fraction: float = 0.0
    master_seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown noise variant {self.variant!r}; expected one of {VARIANTS}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {self.fraction}")

    def apply(self, img: Image, stream_seed: int) -> Image:
        if self.variant == "gaussian":
            return awgn(img, self.sigma, stream_seed)
        if self.variant == "salt_pepper":
            return salt_pepper(img, self.fraction, stream_seed)
        return mixture(img, self.sigma, self.fraction, stream_seed)

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "seed": self.master_seed}
        if self.variant in ("gaussian", "mixture"):
            d["sigma"] = self.sigma
        if self.variant in ("salt_pepper", "mixture"):
            d["fraction"] = self.fraction
        return d

    @classmethod
    def from_dict(cls, d: dict, default_seed: int = 0) -> "NoiseSpec":
        known = {"variant", "sigma", "fraction", "seed"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown noise keys: {sorted(extra)}")
        if "variant" not in d:
            raise ValueError("noise spec needs a 'variant'")
        return cls(
            variant=d["variant"],
            sigma=float(d.get("sigma", 0.0)),
            fraction=float(d.get("fraction", 0.0)),
            master_seed=int(d.get("seed", default_seed)),
        )


def awgn(img: Image, sigma: float, stream_seed: int) -> Image:
    """Add N(0, sigma^2) per pixel (counter-keyed), then quantize.

    Quantization clips, so the realized noise is no longer Gaussian near
    the intensity extremes; that clipping is part of the regime.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return quantize(img)
    noise = standard_normals(stream_seed, img.pixels.size).reshape(img.shape)
    return quantize(Image(img.pixels + sigma * noise))


def salt_pepper(img: Image, fraction: float, stream_seed: int) -> Image:
    """Set exactly round(fraction * N) seeded-shuffle positions to 0 or 255.

    The first half of the chosen positions (extra one on odd counts) becomes
    0, the rest 255; all other pixels pass through unchanged (no implicit
    quantization).
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    n = img.pixels.size
    k = int(np.floor(fraction * n + 0.5))  # round half-away-from-zero
    if k == 0:
        return img
    positions = shuffle_prefix(n, k, stream_seed)
    flat = img.pixels.copy().reshape(-1)
    n_pepper = (k + 1) // 2
    flat[positions[:n_pepper]] = 0.0
    flat[positions[n_pepper:]] = 255.0
    return Image(flat.reshape(img.shape))


def mixture(img: Image, sigma: float, fraction: float, stream_seed: int) -> Image:
    """AWGN first, salt-and-pepper second, with labeled sub-seeds."""
    noisy = awgn(img, sigma, derive_seed(stream_seed, "awgn"))
    return salt_pepper(noisy, fraction, derive_seed(stream_seed, "sp"))


class CorruptedSample(NamedTuple):
    image_id: str
    clean: Image
    noisy: Image


def _synthetic_sample(spec: NoiseSpec, image_id: str, path) -> CorruptedSample:
    clean = load_image(path)
    stream_seed = derive_seed(spec.master_seed, image_id)
    return CorruptedSample(image_id, clean, spec.apply(clean, stream_seed))


def _paired_sample(manifest: DatasetManifest, image_id: str, clean_path) -> CorruptedSample:
    clean = load_image(clean_path)
    noisy_path = manifest.noisy_dir / clean_path.name
    if not noisy_path.is_file():
        raise FileNotFoundError(
            f"dataset {manifest.name!r}: missing pair file for {image_id!r}: {noisy_path}"
        )
    noisy = load_image(noisy_path)
    if noisy.shape != clean.shape:
        raise ValueError(
            f"dataset {manifest.name!r}: dimension mismatch for {image_id!r}: "
            f"clean {clean.shape} vs noisy {noisy.shape}"
        )
    return CorruptedSample(image_id, clean, noisy)


def corrupt_dataset(manifest: DatasetManifest, jobs: int = 1) -> list[CorruptedSample]:
    """Materialize (image_id, clean, noisy) triples in lexicographic id order.

    Synthetic datasets derive one stream seed per image from the spec's
    master seed and the image id; paired datasets read both sides from disk.
    Output is bit-identical for any `jobs`.
    """
    corpus = list_corpus(manifest.clean_dir)
    if manifest.test_count is not None:
        if manifest.test_count > len(corpus):
            raise ValueError(
                f"dataset {manifest.name!r}: test_count {manifest.test_count} "
                f"exceeds corpus size {len(corpus)}"
            )
        corpus = corpus[: manifest.test_count]
    if manifest.kind == "synthetic":
        work = [(image_id, lambda i=image_id, p=path: _synthetic_sample(manifest.noise, i, p))
                for image_id, path in corpus]
    else:
        work = [(image_id, lambda i=image_id, p=path: _paired_sample(manifest, i, p))
                for image_id, path in corpus]
    if jobs <= 1 or len(work) <= 1:
        samples = [fn() for _, fn in work]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(lambda item: item[1](), work))
    return sorted(samples, key=lambda s: s.image_id)


def parse_noise_expr(text: str, default_seed: int = 0) -> NoiseSpec:
    """Parse the CLI noise mini-grammar into a NoiseSpec.

    Grammar (formally documented in the README)::

        expr    := stage ("|" stage)*
        stage   := name (":" params)?
        params  := key "=" number ("," key "=" number)*
        name    := "gaussian" | "sp" | "salt_pepper" | "mixture"

    A single stage maps one-to-one onto NoiseSpec. The only valid
    composition is ``gaussian:... | sp:...`` (in that order), which is the
    mixture regime.
    """
    stages = []
    for raw in text.split("|"):
        raw = raw.strip()
        if not raw:
            raise ValueError(f"empty stage in noise expression {text!r}")
        name, _, params_text = raw.partition(":")
        name = name.strip()
        if name not in _VARIANT_ALIASES:
            raise ValueError(f"unknown noise stage {name!r} in {text!r}")
        params: dict[str, float] = {}
        if params_text.strip():
            for pair in params_text.split(","):
                key, eq, value = pair.partition("=")
                key = key.strip()
                if not eq or not key:
                    raise ValueError(f"malformed parameter {pair!r} in {text!r}")
                try:
                    params[key] = float(value)
                except ValueError:
                    raise ValueError(f"non-numeric value for {key!r} in {text!r}") from None
        stages.append((_VARIANT_ALIASES[name], params))

    def build(variant: str, params: dict[str, float]) -> NoiseSpec:
        allowed = {"gaussian": {"sigma"}, "salt_pepper": {"fraction"},
                   "mixture": {"sigma", "fraction"}}[variant]
        extra = set(params) - allowed
        if extra:
            raise ValueError(f"{variant} does not take {sorted(extra)}")
        return NoiseSpec(variant=variant, master_seed=default_seed, **params)

    if len(stages) == 1:
        return build(*stages[0])
    if len(stages) == 2 and stages[0][0] == "gaussian" and stages[1][0] == "salt_pepper":
        return build("mixture", {**stages[0][1], **stages[1][1]})
    raise ValueError(
        f"unsupported composition in {text!r}: only 'gaussian:... | sp:...' composes (the mixture regime)"
    )
