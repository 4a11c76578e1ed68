"""Built-in expert denoisers: identity baseline, median filter, and a full
two-stage BM3D (block matching + collaborative 3D-transform filtering).

The BM3D here uses an orthonormal 2D DCT per patch and an orthonormal 1D
Haar transform along the group axis; group sizes are forced to powers of
two so the Haar transform is exact. Stage one hard-thresholds the 3D
spectrum; stage two applies empirical Wiener shrinkage estimated from the
stage-one result. All denoisers are deterministic and preserve dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.fft
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import median_filter

from .core import Image, quantize


def identity_denoise(img: Image) -> Image:
    """The "no denoising" baseline; returns its input unchanged."""
    return img


def median_denoise(img: Image, radius: int = 1) -> Image:
    """Median of the (2r+1)^2 neighborhood with mirror padding, quantized."""
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    filtered = median_filter(img.pixels, size=2 * radius + 1, mode="mirror")
    return quantize(Image(filtered))


@dataclass(frozen=True)
class Bm3dParams:
    """Free parameters of the two-stage BM3D (standard profile defaults)."""

    sigma: float
    patch_size: int = 8
    step: int = 3
    search_window: int = 39
    max_matches: int = 16
    match_threshold_hard: float = 2500.0
    match_threshold_wiener: float = 400.0
    hard_lambda: float = 2.7

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.patch_size < 1 or self.step < 1:
            raise ValueError("patch_size and step must be >= 1")
        if self.patch_size > self.search_window:
            raise ValueError(
                f"patch_size {self.patch_size} exceeds search_window {self.search_window}"
            )
        if self.max_matches < 1 or self.max_matches & (self.max_matches - 1):
            raise ValueError(f"max_matches must be a power of two >= 1, got {self.max_matches}")
        if self.match_threshold_hard < 0 or self.match_threshold_wiener < 0 or self.hard_lambda < 0:
            raise ValueError("thresholds must be >= 0")


@dataclass(frozen=True)
class PatchGroup:
    """A stack of similar patches; stack shape is (patch, patch, group_size)."""

    reference_position: tuple[int, int]
    member_positions: tuple[tuple[int, int], ...]
    stack: np.ndarray

    def __post_init__(self):
        k = len(self.member_positions)
        if k < 1 or k & (k - 1):
            raise ValueError(f"group size must be a power of two, got {k}")
        if self.reference_position not in self.member_positions:
            raise ValueError("reference patch missing from the group")
        if self.stack.shape[2] != k:
            raise ValueError(
                f"stack depth {self.stack.shape[2]} does not match member count {k}"
            )


@lru_cache(maxsize=None)
def haar_matrix(k: int) -> np.ndarray:
    """Orthonormal full-depth Haar transform matrix for a power-of-two size."""
    if k < 1 or k & (k - 1):
        raise ValueError(f"Haar size must be a power of two, got {k}")
    if k == 1:
        return np.ones((1, 1))
    sub = haar_matrix(k // 2)
    s = 1.0 / np.sqrt(2.0)
    scaling = np.kron(sub, [s, s])
    detail = np.kron(np.eye(k // 2), [s, -s])
    out = np.vstack([scaling, detail])
    out.setflags(write=False)
    return out


def dct2(patches: np.ndarray) -> np.ndarray:
    """Orthonormal 2D DCT over the last two axes."""
    return scipy.fft.dctn(patches, axes=(-2, -1), norm="ortho")


def idct2(spectra: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dct2`."""
    return scipy.fft.idctn(spectra, axes=(-2, -1), norm="ortho")


def _grid_coords(length: int, patch: int, step: int) -> np.ndarray:
    """Patch origins on the step grid, with the last origin forced so the
    grid covers every pixel."""
    coords = list(range(0, length - patch + 1, step))
    if coords[-1] != length - patch:
        coords.append(length - patch)
    return np.asarray(coords, dtype=np.int64)


def _pow2_floor(n: int) -> int:
    return 1 << (n.bit_length() - 1)


def block_match(img: Image, ref_pos: tuple[int, int], params: Bm3dParams,
                threshold: float) -> PatchGroup:
    """Find the patches most similar to the reference patch.

    Candidate origins lie on the image-wide step grid (forced last row and
    column included) within the search window centered on the reference
    origin. Similarity is the per-pixel mean squared difference; candidates
    at or under `threshold` are kept, ordered by ascending distance with
    row-major ties, and truncated to the largest power of two not exceeding
    `max_matches`. The reference is always included and sorts first.
    """
    p = params.patch_size
    r0, c0 = ref_pos
    h, w = img.shape
    if h < p or w < p:
        raise ValueError(f"image {img.shape} smaller than patch size {p}")
    if not (0 <= r0 <= h - p and 0 <= c0 <= w - p):
        raise ValueError(f"reference patch at {ref_pos} out of bounds for {img.shape}")
    rows = _grid_coords(h, p, params.step)
    cols = _grid_coords(w, p, params.step)
    radius = (params.search_window - p) // 2
    rows = rows[(rows >= r0 - radius) & (rows <= r0 + radius)]
    cols = cols[(cols >= c0 - radius) & (cols <= c0 + radius)]
    cand = [(int(r), int(c)) for r in rows for c in cols]
    if ref_pos not in cand:
        cand.append((r0, c0))

    windows = sliding_window_view(img.pixels, (p, p))
    ref_patch = windows[r0, c0]
    rr = np.fromiter((rc[0] for rc in cand), dtype=np.int64)
    cc = np.fromiter((rc[1] for rc in cand), dtype=np.int64)
    dists = np.mean((windows[rr, cc] - ref_patch) ** 2, axis=(1, 2))

    ref_idx = cand.index((r0, c0))
    order = [i for i in np.lexsort((cc, rr, dists))
             if i != ref_idx and dists[i] <= threshold]
    keep = [ref_idx] + order
    size = _pow2_floor(min(len(keep), params.max_matches))
    keep = keep[:size]
    members = tuple(cand[i] for i in keep)
    stack = np.stack([windows[r, c] for r, c in members], axis=-1)
    return PatchGroup(reference_position=(r0, c0), member_positions=members, stack=stack)


class _Aggregator:
    """Weighted patch accumulation with a Kaiser taper (beta=2)."""

    def __init__(self, shape: tuple[int, int], patch: int):
        self.num = np.zeros(shape)
        self.den = np.zeros(shape)
        taper = np.kaiser(patch, 2.0)
        self.kaiser = np.outer(taper, taper)
        self.patch = patch

    def add(self, estimates: np.ndarray, positions, weight: float) -> None:
        wk = weight * self.kaiser
        p = self.patch
        for est, (r, c) in zip(estimates, positions):
            self.num[r:r + p, c:c + p] += wk * est
            self.den[r:r + p, c:c + p] += wk

    def result(self) -> Image:
        # The forced-last grid covers every pixel, so den > 0 everywhere.
        return quantize(Image(self.num / self.den))


def _grid_spectra(pixels: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                  patch: int) -> dict[tuple[int, int], np.ndarray]:
    """DCT spectra of every grid patch, keyed by origin."""
    windows = sliding_window_view(pixels, (patch, patch))
    spectra = dct2(windows[np.ix_(rows, cols)])
    return {
        (int(r), int(c)): spectra[i, j]
        for i, r in enumerate(rows)
        for j, c in enumerate(cols)
    }


def bm3d_hard_stage(img: Image, params: Bm3dParams) -> Image:
    """Stage one: group, hard-threshold the 3D spectrum, aggregate.

    Every 3D coefficient except the group's DC is zeroed when its magnitude
    is at most hard_lambda * sigma; each group is aggregated with weight
    1 / (sigma^2 * retained_count) under the Kaiser taper.
    """
    if params.sigma <= 0:
        raise ValueError(f"hard stage needs sigma > 0, got {params.sigma}")
    p = params.patch_size
    h, w = img.shape
    if h < p or w < p:
        raise ValueError(f"image {img.shape} smaller than patch size {p}")
    rows = _grid_coords(h, p, params.step)
    cols = _grid_coords(w, p, params.step)
    spectra = _grid_spectra(img.pixels, rows, cols, p)
    threshold = params.hard_lambda * params.sigma
    sigma_sq = params.sigma * params.sigma
    agg = _Aggregator((h, w), p)
    for r in rows:
        for c in cols:
            group = block_match(img, (int(r), int(c)), params, params.match_threshold_hard)
            k = len(group.member_positions)
            flat = np.stack([spectra[pos].reshape(-1) for pos in group.member_positions])
            z = haar_matrix(k) @ flat
            mask = np.abs(z) > threshold
            mask[0, 0] = True  # the group's DC is exempt
            retained = int(mask.sum())
            est = haar_matrix(k).T @ (z * mask)
            patches = idct2(est.reshape(k, p, p))
            agg.add(patches, group.member_positions, 1.0 / (sigma_sq * retained))
    return agg.result()


def bm3d_wiener_stage(noisy: Image, basic: Image, params: Bm3dParams) -> Image:
    """Stage two: match on the basic estimate, Wiener-shrink the noisy spectrum.

    Shrinkage coefficients W = B^2 / (B^2 + sigma^2) come from the basic
    group's 3D spectrum; groups are aggregated with weight
    1 / (sigma^2 * ||W||^2) under the Kaiser taper.
    """
    if noisy.shape != basic.shape:
        raise ValueError(f"dimension mismatch: noisy {noisy.shape} vs basic {basic.shape}")
    if params.sigma <= 0:
        raise ValueError(f"Wiener stage needs sigma > 0, got {params.sigma}")
    p = params.patch_size
    h, w = noisy.shape
    if h < p or w < p:
        raise ValueError(f"image {noisy.shape} smaller than patch size {p}")
    rows = _grid_coords(h, p, params.step)
    cols = _grid_coords(w, p, params.step)
    basic_spectra = _grid_spectra(basic.pixels, rows, cols, p)
    noisy_spectra = _grid_spectra(noisy.pixels, rows, cols, p)
    sigma_sq = params.sigma * params.sigma
    agg = _Aggregator((h, w), p)
    for r in rows:
        for c in cols:
            group = block_match(basic, (int(r), int(c)), params, params.match_threshold_wiener)
            k = len(group.member_positions)
            haar = haar_matrix(k)
            b3d = haar @ np.stack([basic_spectra[pos].reshape(-1) for pos in group.member_positions])
            y3d = haar @ np.stack([noisy_spectra[pos].reshape(-1) for pos in group.member_positions])
            shrink = b3d * b3d / (b3d * b3d + sigma_sq)
            est = haar.T @ (shrink * y3d)
            patches = idct2(est.reshape(k, p, p))
            energy = max(float(np.sum(shrink * shrink)), np.finfo(np.float64).tiny)
            agg.add(patches, group.member_positions, 1.0 / (sigma_sq * energy))
    return agg.result()


def bm3d(img: Image, sigma: float, params: Bm3dParams | None = None) -> Image:
    """Full two-stage BM3D with the default profile."""
    if params is None:
        params = Bm3dParams(sigma=sigma)
    elif params.sigma != sigma:
        params = replace(params, sigma=sigma)
    basic = bm3d_hard_stage(img, params)
    return bm3d_wiener_stage(img, basic, params)


# ---------------------------------------------------------------------------
# Registry used by the harness to instantiate built-in methods.

BUILTIN_IDS = ("identity", "median", "bm3d")


def make_builtin(builtin_id: str, parameters: dict | None = None):
    """Build a callable Image -> Image for a built-in denoiser."""
    parameters = dict(parameters or {})
    if builtin_id == "identity":
        if parameters:
            raise ValueError(f"identity takes no parameters, got {sorted(parameters)}")
        return identity_denoise
    if builtin_id == "median":
        radius = int(parameters.pop("radius", 1))
        if parameters:
            raise ValueError(f"unknown median parameters: {sorted(parameters)}")
        return lambda img: median_denoise(img, radius=radius)
    if builtin_id == "bm3d":
        if "sigma" not in parameters:
            raise ValueError("bm3d requires an explicit 'sigma' parameter")
        valid = {f for f in Bm3dParams.__dataclass_fields__}
        unknown = set(parameters) - valid
        if unknown:
            raise ValueError(f"unknown bm3d parameters: {sorted(unknown)}")
        params = Bm3dParams(**parameters)
        return lambda img: bm3d(img, params.sigma, params)
    raise ValueError(f"unknown builtin denoiser {builtin_id!r}; expected one of {BUILTIN_IDS}")
