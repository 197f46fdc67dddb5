from typing import Dict, List, Tuple

import numpy as np

from shared import InvalidArgumentError

METRIC_NAMES = ('accuracy', 'precision', 'recall', 'f1', 'specificity')


class ConfusionMatrix:
    """C x C counts, rows = true class, columns = predicted class."""

    def __init__(self, counts):
        array = np.array(counts, dtype=np.int64)
        if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] < 1:
            raise InvalidArgumentError(f"confusion matrix must be square and non-empty, got {array.shape}")
        if np.any(array < 0):
            raise InvalidArgumentError("confusion counts must be non-negative")
        array.setflags(write=False)
        self.counts = array

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_rest(self, class_id: int) -> Tuple[int, int, int, int]:
        """(TP, FP, FN, TN) with class_id as the positive class."""
        tp = int(self.counts[class_id, class_id])
        fp = int(self.counts[:, class_id].sum()) - tp
        fn = int(self.counts[class_id, :].sum()) - tp
        tn = self.total - tp - fp - fn
        return tp, fp, fn, tn

    def to_list(self) -> List[List[int]]:
        return self.counts.tolist()

    def __str__(self):
        return f"ConfusionMatrix(C={self.num_classes}, total={self.total})"


class ClassMetrics:
    """The five metrics of one class under the one-vs-rest reduction."""

    def __init__(self, class_id: int, tp: int, fp: int, fn: int, tn: int, values: Dict[str, float],
                 degenerate: List[str]):
        self.class_id = class_id
        self.tp, self.fp, self.fn, self.tn = tp, fp, fn, tn
        self.values = values
        self.degenerate = degenerate

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def to_dict(self) -> Dict:
        return {
            'class_id': self.class_id,
            'tp': self.tp, 'fp': self.fp, 'fn': self.fn, 'tn': self.tn,
            **self.values,
            'degenerate': list(self.degenerate),
        }


class MetricsReport:
    def __init__(self, confusion: ConfusionMatrix, per_class: List[ClassMetrics], macro: Dict[str, float],
                 plain_accuracy: float):
        self.confusion = confusion
        self.per_class = per_class
        self.macro = macro
        self.plain_accuracy = plain_accuracy

    def to_dict(self) -> Dict:
        return {
            'confusion': self.confusion.to_list(),
            'per_class': [metrics.to_dict() for metrics in self.per_class],
            'macro': dict(self.macro),
            'plain_accuracy': self.plain_accuracy,
        }

    def __str__(self):
        return f"MetricsReport(macro_f1={self.macro['f1']:.3f}, plain_accuracy={self.plain_accuracy:.3f})"
