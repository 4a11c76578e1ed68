"""Shared fixtures: a deterministic natural-image corpus built from the
scikit-image sample photographs (BSD-style content: portraits, textures,
scenes, documents), cropped to 160x160 grayscale."""

import numpy as np
import pytest

from denoise_bench.core import LUMA_WEIGHTS, Image, round_half_away_from_zero, save_image

CROP_SIZE = 160

# (source image, crop offsets); 28 crops >= the 20 the anchors need.
CORPUS_CROPS = {
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

#: Fixed master seed for every corpus-level test in the suite.
CORPUS_SEED = 20260809


def _to_gray(arr: np.ndarray) -> np.ndarray:
    arr = arr.astype(np.float64)
    if arr.ndim == 3:
        arr = round_half_away_from_zero(arr @ np.asarray(LUMA_WEIGHTS))
    return round_half_away_from_zero(np.clip(arr, 0, 255))


@pytest.fixture(scope="session")
def corpus_images() -> list[tuple[str, Image]]:
    data = pytest.importorskip("skimage.data")
    images = []
    for name, offsets in CORPUS_CROPS.items():
        arr = _to_gray(getattr(data, name)())
        for r, c in offsets:
            crop = arr[r:r + CROP_SIZE, c:c + CROP_SIZE]
            assert crop.shape == (CROP_SIZE, CROP_SIZE)
            images.append((f"{name}_{r}_{c}", Image(crop)))
    assert len(images) >= 20
    return images


@pytest.fixture(scope="session")
def corpus_dir(corpus_images, tmp_path_factory):
    directory = tmp_path_factory.mktemp("corpus")
    for image_id, img in corpus_images:
        save_image(img, directory / f"{image_id}.png")
    return directory


@pytest.fixture()
def natural_image(corpus_images) -> Image:
    by_id = dict(corpus_images)
    return by_id["camera_0_0"]
