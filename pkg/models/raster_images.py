from typing import Tuple

import numpy as np

from shared import InvalidArgumentError


class RasterImage:
    """2-D float32 intensity grid (m rows, n columns) with its nominal value range.

    Pixels are copied on construction and frozen, so instances can be shared
    between threads.
    """

    def __init__(self, pixels, nominal_range: Tuple[float, float] = (0.0, 255.0)):
        array = np.array(pixels, dtype=np.float32)
        if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
            raise InvalidArgumentError(f"raster must be a non-empty 2-D grid, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise InvalidArgumentError("raster contains non-finite pixel values")
        lo, hi = nominal_range
        if not lo <= hi:
            raise InvalidArgumentError(f"nominal range must satisfy lo <= hi, got {nominal_range}")
        array.setflags(write=False)
        self.pixels = array
        self.nominal_range = (float(lo), float(hi))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape

    def __str__(self):
        lo, hi = self.nominal_range
        return f"RasterImage({self.height}x{self.width}, range=[{lo:g}, {hi:g}])"
