from typing import Iterable, Tuple

import numpy as np

from shared import InvalidArgumentError
from shared.constants import ALL_LABELS, LUNG_LABELS, LABEL_HEART, NUM_LABELS


class LabelMask:
    """Per-pixel anatomy labels: 0 background, 1 heart, 2 left lung, 3 right lung."""

    def __init__(self, labels):
        array = np.array(labels)
        if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
            raise InvalidArgumentError(f"mask must be a non-empty 2-D grid, got shape {array.shape}")
        if array.size and (array.min() < 0 or array.max() >= NUM_LABELS):
            found = sorted(set(np.unique(array).tolist()) - ALL_LABELS)
            raise InvalidArgumentError(f"mask contains labels outside {sorted(ALL_LABELS)}: {found}")
        array = array.astype(np.uint8)
        array.setflags(write=False)
        self.labels = array

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape

    def binary(self, keep: Iterable[int]) -> np.ndarray:
        return np.isin(self.labels, list(keep))

    @property
    def lung(self) -> np.ndarray:
        return self.binary(LUNG_LABELS)

    @property
    def heart(self) -> np.ndarray:
        return self.labels == LABEL_HEART

    def histogram(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=NUM_LABELS)

    def __str__(self):
        counts = ", ".join(f"{label}:{count}" for label, count in enumerate(self.histogram()))
        return f"LabelMask({self.height}x{self.width}, {counts})"
