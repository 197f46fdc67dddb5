from collections import OrderedDict
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from shared import InvalidArgumentError
from shared.constants import NUM_LABELS


class ModelParams:
    """Ordered, named float64 tensors (the parameter set Theta).

    Shapes are fixed after construction; values may be updated in place by the
    optimizer through `update`.
    """

    def __init__(self, tensors: Mapping[str, np.ndarray], kind: str = 'generic', meta: Optional[Dict] = None):
        self.kind = kind
        self.meta = dict(meta or {})
        self._tensors: 'OrderedDict[str, np.ndarray]' = OrderedDict()
        for name, value in tensors.items():
            array = np.array(value, dtype=np.float64)
            if not np.all(np.isfinite(array)):
                raise InvalidArgumentError(f"parameter {name!r} has non-finite values")
            self._tensors[name] = array

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> List[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: value.shape for name, value in self._tensors.items()}

    def update(self, name: str, value: np.ndarray) -> None:
        current = self._tensors[name]
        if value.shape != current.shape:
            raise InvalidArgumentError(f"shape of {name!r} is fixed at {current.shape}, got {value.shape}")
        self._tensors[name] = np.asarray(value, dtype=np.float64)

    def copy(self) -> 'ModelParams':
        return ModelParams({name: value.copy() for name, value in self._tensors.items()}, kind=self.kind,
                           meta=self.meta)

    def count(self) -> int:
        return int(sum(value.size for value in self._tensors.values()))

    def __str__(self):
        return f"ModelParams({self.kind}, {len(self)} tensors, {self.count()} values)"


class Logits:
    """Pre-softmax class scores y_c."""

    def __init__(self, scores):
        array = np.array(scores, dtype=np.float64)
        if array.ndim != 1 or array.size < 1:
            raise InvalidArgumentError(f"logits must be a non-empty vector, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise InvalidArgumentError("logits must be finite")
        self.scores = array

    def __len__(self):
        return self.scores.size

    def __str__(self):
        return f"Logits({np.array2string(self.scores, precision=4)})"


class FeatureMaps:
    """Last convolutional layer channels f^k, shape (k, u, v)."""

    def __init__(self, channels):
        array = np.array(channels, dtype=np.float64)
        if array.ndim != 3:
            raise InvalidArgumentError(f"feature maps must be (k, u, v), got shape {array.shape}")
        self.channels = array

    @property
    def k(self) -> int:
        return self.channels.shape[0]

    @property
    def u(self) -> int:
        return self.channels.shape[1]

    @property
    def v(self) -> int:
        return self.channels.shape[2]

    def __str__(self):
        return f"FeatureMaps(k={self.k}, {self.u}x{self.v})"


class SegPrediction:
    """Per-pixel softmax probabilities p_Theta(x_j), shape (m, n, classes)."""

    def __init__(self, probs):
        array = np.array(probs, dtype=np.float64)
        if array.ndim != 3 or array.shape[2] != NUM_LABELS:
            raise InvalidArgumentError(f"segmentation probabilities must be (m, n, {NUM_LABELS}), got {array.shape}")
        if np.any(array < 0.0) or np.any(array > 1.0):
            raise InvalidArgumentError("segmentation probabilities must lie in [0, 1]")
        if not np.allclose(array.sum(axis=2), 1.0, atol=1e-5):
            raise InvalidArgumentError("segmentation probabilities must sum to 1 per pixel")
        self.probs = array

    @property
    def shape(self):
        return self.probs.shape[:2]


class ClassWeights:
    """Per-class loss weights lambda_s."""

    def __init__(self, lambda_s):
        array = np.array(lambda_s, dtype=np.float64)
        if array.ndim != 1 or array.size != NUM_LABELS:
            raise InvalidArgumentError(f"class weights need {NUM_LABELS} entries, got shape {array.shape}")
        if np.any(array < 0.0) or not np.any(array > 0.0):
            raise InvalidArgumentError("class weights must be non-negative and not all zero")
        self.lambda_s = array

    @classmethod
    def uniform(cls) -> 'ClassWeights':
        return cls(np.ones(NUM_LABELS))

    def to_list(self) -> List[float]:
        return [float(value) for value in self.lambda_s]

    def __str__(self):
        return f"ClassWeights({np.array2string(self.lambda_s, precision=3)})"
