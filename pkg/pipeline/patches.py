"""Lung-constrained random patch sampling, placement bookkeeping and coverage counts."""
import logging
from typing import List, Sequence, Tuple

import numpy as np

from models import CoverageMap, LabelMask, Patch, PatchPlacement, RasterImage
from shared import InvalidArgumentError, NoLungError
from .segmask import lung_pixel_array

logger = logging.getLogger(__name__)


def sample_centers(mask: LabelMask, K: int, seed: int) -> List[Tuple[int, int]]:
    """K centers drawn uniformly with replacement from the lung pixels."""
    if K < 1:
        raise InvalidArgumentError(f"K must be >= 1, got {K}")
    coords = lung_pixel_array(mask)
    if len(coords) == 0:
        raise NoLungError("mask has no lung pixels to center patches on")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(coords), size=K)
    return [(int(coords[i, 0]), int(coords[i, 1])) for i in picks]


def place_patch(center: Tuple[int, int], p: int, q: int, m: int, n: int) -> PatchPlacement:
    """p x q rectangle centered at center, shifted minimally to lie inside the m x n image."""
    if p < 1 or q < 1:
        raise InvalidArgumentError(f"patch size must be positive, got {p}x{q}")
    if p > m or q > n:
        raise InvalidArgumentError(f"patch {p}x{q} is larger than the {m}x{n} image")
    row, col = center
    top = min(max(row - p // 2, 0), m - p)
    left = min(max(col - q // 2, 0), n - q)
    return PatchPlacement(top, left, p, q)


def crop_placement(img: RasterImage, placement: PatchPlacement) -> Patch:
    return Patch(img.pixels[placement.window()])


def extract_patches(img: RasterImage, mask: LabelMask, K: int, p: int, q: int,
                    seed: int) -> Tuple[List[Patch], List[PatchPlacement]]:
    """K patches cropped at lung-centered placements; lists are index-aligned."""
    if img.shape != mask.shape:
        raise InvalidArgumentError(f"image {img.shape} and mask {mask.shape} dimensions differ")
    m, n = img.shape
    centers = sample_centers(mask, K, seed)
    placements = [place_patch(center, p, q, m, n) for center in centers]
    patches = [crop_placement(img, placement) for placement in placements]
    logger.debug("extracted %d patches of %dx%d (seed %d)", K, p, q, seed)
    return patches, placements


def coverage(placements: Sequence[PatchPlacement], m: int, n: int) -> CoverageMap:
    counts = np.zeros((m, n), dtype=np.int32)
    for placement in placements:
        if not placement.fits(m, n):
            raise InvalidArgumentError(f"{placement!r} does not fit a {m}x{n} image")
        counts[placement.window()] += 1
    return CoverageMap(counts, len(placements))
