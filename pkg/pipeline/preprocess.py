"""Universal intensity normalization: cast, equalize, gamma, resize."""
import logging
from typing import Optional

import numpy as np

from models import PreprocessConfig, RasterImage
from shared import InvalidArgumentError
from shared.constants import MAX_GRAY
from .core import resize_image

logger = logging.getLogger(__name__)

SUPPORTED_DEPTHS = (8, 16)


def cast_to_float(raw: np.ndarray, depth: Optional[int] = None) -> RasterImage:
    """uint8/uint16 raster -> float32 RasterImage with nominal range [0, 2^depth - 1]."""
    raw = np.asarray(raw)
    if depth is None:
        if raw.dtype == np.uint8:
            depth = 8
        elif raw.dtype == np.uint16:
            depth = 16
        else:
            raise InvalidArgumentError(f"cannot infer bit depth from dtype {raw.dtype}")
    if depth not in SUPPORTED_DEPTHS:
        raise InvalidArgumentError(f"unsupported bit depth {depth}, expected one of {SUPPORTED_DEPTHS}")
    if not np.issubdtype(raw.dtype, np.integer):
        raise InvalidArgumentError(f"raw raster must hold integers, got {raw.dtype}")
    top = 2 ** depth - 1
    if raw.size and (raw.min() < 0 or raw.max() > top):
        raise InvalidArgumentError(f"raw values exceed the {depth}-bit range [0, {top}]")
    return RasterImage(raw.astype(np.float32), (0.0, float(top)))


def hist_equalize(img: RasterImage, gray_levels: int) -> RasterImage:
    """Map pixels through the empirical CDF of a gray_levels-bin histogram over [min, max].

    Output lies in [0, 255]; a constant image maps to 255 everywhere.
    """
    if gray_levels < 2:
        raise InvalidArgumentError(f"gray_levels must be >= 2, got {gray_levels}")
    values = img.pixels.astype(np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        bins = np.floor((values - lo) / (hi - lo) * gray_levels).astype(np.int64)
        bins = np.clip(bins, 0, gray_levels - 1)
    else:
        bins = np.zeros(values.shape, dtype=np.int64)
    counts = np.bincount(bins.ravel(), minlength=gray_levels)
    cdf = np.cumsum(counts) / values.size
    return RasterImage(MAX_GRAY * cdf[bins], (0.0, MAX_GRAY))


def gamma_correct(img: RasterImage, gamma: float) -> RasterImage:
    """out = 255 * (in / 255) ** gamma."""
    if not gamma > 0.0:
        raise InvalidArgumentError(f"gamma must be > 0, got {gamma}")
    values = img.pixels.astype(np.float64)
    if values.min() < 0.0:
        raise InvalidArgumentError("gamma correction needs non-negative pixels")
    return RasterImage(MAX_GRAY * np.power(values / MAX_GRAY, gamma), (0.0, MAX_GRAY))


def preprocess_pipeline(raw: np.ndarray, cfg: PreprocessConfig, depth: Optional[int] = None) -> RasterImage:
    image = cast_to_float(raw, depth)
    image = hist_equalize(image, cfg.gray_levels)
    image = gamma_correct(image, cfg.gamma)
    image = resize_image(image, cfg.target_size, cfg.target_size)
    logger.debug("preprocessed %s raster to %s", raw.shape, image)
    return image
