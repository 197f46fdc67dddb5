from typing import Dict, List, Optional

import numpy as np

from shared import InvalidArgumentError
from .network_params import ModelParams


class PatchSet:
    """Model-resolution inputs with their class labels and the index of the image each came from."""

    def __init__(self, inputs, labels, groups):
        inputs = np.asarray(inputs, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        groups = np.asarray(groups, dtype=np.int64)
        if inputs.ndim != 3 or inputs.shape[1] != inputs.shape[2]:
            raise InvalidArgumentError(f"patch set inputs must be (N, s, s), got {inputs.shape}")
        if labels.shape != (inputs.shape[0],) or groups.shape != (inputs.shape[0],):
            raise InvalidArgumentError("labels and groups must align with inputs")
        if inputs.shape[0] == 0:
            raise InvalidArgumentError("patch set is empty")
        for group in np.unique(groups):
            if np.unique(labels[groups == group]).size != 1:
                raise InvalidArgumentError(f"image {group} carries more than one label")
        self.inputs = inputs
        self.labels = labels
        self.groups = groups

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_size(self) -> int:
        return self.inputs.shape[1]

    def group_ids(self) -> np.ndarray:
        return np.unique(self.groups)

    def group_label(self, group: int) -> int:
        return int(self.labels[np.argmax(self.groups == group)])

    def select_groups(self, keep) -> 'PatchSet':
        rows = np.isin(self.groups, np.asarray(list(keep), dtype=np.int64))
        return PatchSet(self.inputs[rows], self.labels[rows], self.groups[rows])

    def __str__(self):
        return f"PatchSet({len(self)} inputs of {self.input_size}x{self.input_size}, {self.group_ids().size} images)"


class TrainingResult:
    """Best-epoch parameters and the per-epoch curves of one training run."""

    def __init__(self, params: ModelParams, curves: List[Dict[str, float]], best_epoch: int,
                 best_score: float, score_name: str, extra: Optional[Dict] = None):
        self.params = params
        self.curves = curves
        self.best_epoch = int(best_epoch)
        self.best_score = float(best_score)
        self.score_name = score_name
        self.extra = dict(extra or {})

    @property
    def epochs_run(self) -> int:
        return len(self.curves)

    def to_dict(self) -> Dict:
        return {
            'kind': self.params.kind,
            'curves': self.curves,
            'best_epoch': self.best_epoch,
            'best_score': self.best_score,
            'score_name': self.score_name,
            'epochs_run': self.epochs_run,
            **self.extra,
        }

    def __str__(self):
        return (f"TrainingResult({self.params.kind}, best {self.score_name}={self.best_score:.4f} "
                f"at epoch {self.best_epoch}/{self.epochs_run})")


class LabeledImage:
    """One dataset item: raw raster, anatomy mask at raw resolution, class id and split."""

    def __init__(self, raw: np.ndarray, mask, class_id: int, split: str = 'train', name: str = ''):
        raw = np.asarray(raw)
        if raw.shape != mask.shape:
            raise InvalidArgumentError(f"raw image {raw.shape} and mask {mask.shape} dimensions differ")
        self.raw = raw
        self.mask = mask
        self.class_id = int(class_id)
        self.split = split
        self.name = name

    def __str__(self):
        return f"LabeledImage({self.name or '?'}, class={self.class_id}, split={self.split})"
