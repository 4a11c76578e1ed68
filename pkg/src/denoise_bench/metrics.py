"""Quality metrics, aggregate statistics, and rank-correlation analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .core import EvaluationRecord, Image

#: Peak intensity for PSNR on the 8-bit scale.
PEAK = 255.0

#: SSIM defaults (Wang et al.): 11x11 Gaussian window, sigma 1.5.
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * PEAK) ** 2
SSIM_C2 = (0.03 * PEAK) ** 2


def _check_same_shape(reference: Image, test: Image) -> None:
    if reference.shape != test.shape:
        raise ValueError(f"dimension mismatch: {reference.shape} vs {test.shape}")


def psnr(reference: Image, test: Image) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the images are identical."""
    _check_same_shape(reference, test)
    mse = float(np.mean((reference.pixels - test.pixels) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def _ssim_window() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    return g / g.sum()


_SSIM_TAPS = _ssim_window()


def _local_mean(field: np.ndarray) -> np.ndarray:
    # Separable Gaussian filter; interior slice emulates 'valid' convolution.
    half = SSIM_WINDOW // 2
    out = correlate1d(field, _SSIM_TAPS, axis=0, mode="constant")
    out = correlate1d(out, _SSIM_TAPS, axis=1, mode="constant")
    return out[half:-half, half:-half]


def ssim(reference: Image, test: Image) -> float:
    """Mean local structural similarity with the standard Gaussian window.

    Local statistics are weighted moments under the 11x11 Gaussian window,
    evaluated on fully-interior windows only; symmetric in its arguments.
    """
    _check_same_shape(reference, test)
    if reference.height < SSIM_WINDOW or reference.width < SSIM_WINDOW:
        raise ValueError(
            f"image {reference.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    x = reference.pixels
    y = test.pixels
    mu_x = _local_mean(x)
    mu_y = _local_mean(y)
    var_x = _local_mean(x * x) - mu_x * mu_x
    var_y = _local_mean(y * y) - mu_y * mu_y
    cov = _local_mean(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class AggregateStats:
    """Mean, median, and type-7 percentiles of a value sample."""

    mean: float
    median: float
    p10: float
    p25: float
    p75: float
    p90: float
    count: int


def aggregate(values) -> AggregateStats:
    """Summarize a non-empty sequence (linear-interpolation percentiles).

    Values are sorted before any reduction so the result is bit-identical
    under permutation of the input.
    """
    arr = np.sort(np.asarray(list(values), dtype=np.float64))
    if arr.size == 0:
        raise ValueError("cannot aggregate an empty sequence")
    p10, p25, p50, p75, p90 = np.percentile(arr, [10, 25, 50, 75, 90])
    return AggregateStats(
        mean=float(arr.mean()),
        median=float(p50),
        p10=float(p10),
        p25=float(p25),
        p75=float(p75),
        p90=float(p90),
        count=int(arr.size),
    )


@dataclass(frozen=True)
class MethodRanking:
    """Methods ordered best-first by mean PSNR for one noise regime."""

    noise_regime: str
    ordered_methods: tuple[str, ...]
    scores: dict[str, float]


def rank_methods(records: list[EvaluationRecord], regime: str) -> MethodRanking:
    """Rank methods by mean PSNR on one dataset; +inf records are excluded
    from means (a method that is exact everywhere scores +inf)."""
    by_method: dict[str, list[float]] = {}
    for rec in records:
        if rec.dataset == regime:
            by_method.setdefault(rec.method, []).append(rec.psnr_db)
    if not by_method:
        raise ValueError(f"no records for regime {regime!r}")
    scores: dict[str, float] = {}
    for method, values in by_method.items():
        finite = [v for v in values if math.isfinite(v)]
        scores[method] = float(np.mean(finite)) if finite else math.inf
    ordered = tuple(sorted(scores, key=lambda m: (-scores[m], m)))
    return MethodRanking(noise_regime=regime, ordered_methods=ordered, scores=scores)


def kendall_tau(rank_a: MethodRanking, rank_b: MethodRanking) -> float:
    """Kendall tau-b between two rankings of the same method set.

    Pairs tied in mean PSNR stay tied (tie-corrected normalization). With no
    ties this reduces to (concordant - discordant) / (n(n-1)/2). Degenerate
    cases: fewer than two methods -> 1.0; all pairs tied on either side -> 0.0.
    """
    methods = sorted(rank_a.scores)
    if sorted(rank_b.scores) != methods:
        raise ValueError(
            f"method-set mismatch: {sorted(rank_a.scores)} vs {sorted(rank_b.scores)}"
        )
    n = len(methods)
    if n < 2:
        return 1.0
    concordant = discordant = tied_a = tied_b = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            da = rank_a.scores[methods[i]] - rank_a.scores[methods[j]]
            db = rank_b.scores[methods[i]] - rank_b.scores[methods[j]]
            if da == 0 and db == 0:
                continue
            if da == 0:
                tied_a += 1
            elif db == 0:
                tied_b += 1
            elif (da > 0) == (db > 0):
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt(
        (concordant + discordant + tied_a) * (concordant + discordant + tied_b)
    )
    if denom == 0.0:
        return 0.0
    return (concordant - discordant) / denom
