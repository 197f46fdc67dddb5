import numpy as np

from shared import InvalidArgumentError

PATCH_SCOPE = 'patch'
IMAGE_SCOPE = 'image'


class ChannelWeights:
    """alpha_k^c for one class, with the scaling count Z = u * v."""

    def __init__(self, alpha, Z: int):
        array = np.array(alpha, dtype=np.float64)
        if array.ndim != 1 or not np.all(np.isfinite(array)):
            raise InvalidArgumentError("channel weights must be a finite vector")
        if Z < 1:
            raise InvalidArgumentError(f"scaling count Z must be positive, got {Z}")
        self.alpha = array
        self.Z = int(Z)


class SaliencyMap:
    """Non-negative activation grid in [0, 1], patch-level (p x q) or image-level (m x n)."""

    def __init__(self, values, scope: str = PATCH_SCOPE):
        if scope not in (PATCH_SCOPE, IMAGE_SCOPE):
            raise InvalidArgumentError(f"unknown saliency scope {scope!r}")
        array = np.array(values, dtype=np.float64)
        if array.ndim != 2:
            raise InvalidArgumentError(f"saliency map must be 2-D, got shape {array.shape}")
        if array.size and (array.min() < 0.0 or array.max() > 1.0 + 1e-9):
            raise InvalidArgumentError("saliency values must lie in [0, 1]")
        array = np.clip(array, 0.0, 1.0)
        array.setflags(write=False)
        self.values = array
        self.scope = scope

    @property
    def shape(self):
        return self.values.shape

    def __str__(self):
        return f"SaliencyMap({self.scope}, {self.shape[0]}x{self.shape[1]}, max={self.values.max():.3f})"
