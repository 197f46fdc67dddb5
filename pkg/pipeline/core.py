"""Raster and mask primitives: resizing, cropping, masking and re-embedding."""
from typing import Iterable

import numpy as np

from models import LabelMask, PatchPlacement, RasterImage
from shared import InvalidArgumentError


def _check_size(out_h: int, out_w: int) -> None:
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError(f"target dimensions must be >= 1, got {out_h}x{out_w}")


def _aligned_positions(in_dim: int, out_dim: int) -> np.ndarray:
    # endpoint-aligned: out index i samples source i * (in - 1) / (out - 1)
    if out_dim == 1:
        return np.array([(in_dim - 1) / 2.0])
    return np.arange(out_dim, dtype=np.float64) * (in_dim - 1) / (out_dim - 1)


def _interpolate_axis(values: np.ndarray, positions: np.ndarray, axis: int) -> np.ndarray:
    in_dim = values.shape[axis]
    lower = np.floor(positions).astype(np.int64)
    lower = np.clip(lower, 0, in_dim - 1)
    upper = np.minimum(lower + 1, in_dim - 1)
    frac = positions - lower
    a = np.take(values, lower, axis=axis)
    b = np.take(values, upper, axis=axis)
    shape = [1, 1]
    shape[axis] = -1
    return a + (b - a) * frac.reshape(shape)


def bilinear(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Endpoint-aligned bilinear resampling of a 2-D float array (float64 result)."""
    _check_size(out_h, out_w)
    grid = np.asarray(values, dtype=np.float64)
    rows = _interpolate_axis(grid, _aligned_positions(grid.shape[0], out_h), axis=0)
    return _interpolate_axis(rows, _aligned_positions(grid.shape[1], out_w), axis=1)


def resize_image(img: RasterImage, out_h: int, out_w: int) -> RasterImage:
    """Bilinear resize; a constant image stays constant and same-size resize is the identity."""
    _check_size(out_h, out_w)
    if (out_h, out_w) == img.shape:
        return img
    return RasterImage(bilinear(img.pixels, out_h, out_w), img.nominal_range)


def _nearest_indices(in_dim: int, out_dim: int) -> np.ndarray:
    indices = np.floor((np.arange(out_dim) + 0.5) * in_dim / out_dim).astype(np.int64)
    return np.clip(indices, 0, in_dim - 1)


def resize_mask(mask: LabelMask, out_h: int, out_w: int) -> LabelMask:
    """Nearest-neighbour resampling; never introduces a label absent from the input."""
    _check_size(out_h, out_w)
    rows = _nearest_indices(mask.height, out_h)
    cols = _nearest_indices(mask.width, out_w)
    return LabelMask(mask.labels[np.ix_(rows, cols)])


def apply_mask(img: RasterImage, mask: LabelMask, keep: Iterable[int]) -> RasterImage:
    """Zero every pixel whose label is not in keep."""
    if img.shape != mask.shape:
        raise InvalidArgumentError(f"image {img.shape} and mask {mask.shape} dimensions differ")
    kept = mask.binary(set(keep))
    return RasterImage(np.where(kept, img.pixels, 0.0), img.nominal_range)


def crop(img: RasterImage, top: int, left: int, p: int, q: int) -> RasterImage:
    """The p x q sub-grid at (top, left), no resampling."""
    if p < 1 or q < 1 or top < 0 or left < 0 or top + p > img.height or left + q > img.width:
        raise InvalidArgumentError(
            f"crop rectangle top={top} left={left} size={p}x{q} is outside a {img.height}x{img.width} image")
    return RasterImage(img.pixels[top:top + p, left:left + q], img.nominal_range)


def embed(values: np.ndarray, placement: PatchPlacement, m: int, n: int) -> np.ndarray:
    """Copy a p x q grid into a zero m x n grid at its placement (the operator Q_k)."""
    values = np.asarray(values)
    if values.shape != (placement.p, placement.q):
        raise InvalidArgumentError(f"values {values.shape} do not match placement {placement.p}x{placement.q}")
    if not placement.fits(m, n):
        raise InvalidArgumentError(f"{placement!r} does not fit a {m}x{n} image")
    out = np.zeros((m, n), dtype=np.float64)
    out[placement.window()] = values
    return out
