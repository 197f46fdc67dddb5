"""Confusion matrix and the five one-vs-rest classification metrics with macro averaging."""
from typing import Sequence, Tuple

import numpy as np

from models import ClassMetrics, ConfusionMatrix, MetricsReport, METRIC_NAMES
from shared import InvalidArgumentError


def confusion(preds: Sequence[int], truths: Sequence[int], num_classes: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).ravel()
    truths = np.asarray(truths, dtype=np.int64).ravel()
    if preds.size != truths.size:
        raise InvalidArgumentError(f"predictions ({preds.size}) and truths ({truths.size}) differ in length")
    if num_classes < 1:
        raise InvalidArgumentError(f"class count must be >= 1, got {num_classes}")
    for name, ids in (('prediction', preds), ('truth', truths)):
        if ids.size and (ids.min() < 0 or ids.max() >= num_classes):
            raise InvalidArgumentError(f"{name} class id out of range [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (truths, preds), 1)
    return ConfusionMatrix(counts)


def _ratio(numerator: int, denominator: int) -> Tuple[float, bool]:
    """numerator / denominator, or (0.0, True) when the denominator is zero."""
    if denominator == 0:
        return 0.0, True
    return numerator / denominator, False


def metrics_from_confusion(cm: ConfusionMatrix) -> MetricsReport:
    total = cm.total
    if total == 0:
        raise InvalidArgumentError("confusion matrix is empty")
    per_class = []
    for class_id in range(cm.num_classes):
        tp, fp, fn, tn = cm.one_vs_rest(class_id)
        degenerate = []
        accuracy, flag = _ratio(tn + tp, tn + tp + fn + fp)
        if flag:
            degenerate.append('accuracy')
        precision, flag = _ratio(tp, tp + fp)
        if flag:
            degenerate.append('precision')
        recall, flag = _ratio(tp, tp + fn)
        if flag:
            degenerate.append('recall')
        f1, flag = _ratio(2 * precision * recall, precision + recall) if precision + recall > 0 else (0.0, True)
        if flag:
            degenerate.append('f1')
        specificity, flag = _ratio(tn, tn + fp)
        if flag:
            degenerate.append('specificity')
        values = {'accuracy': accuracy, 'precision': precision, 'recall': recall, 'f1': f1,
                  'specificity': specificity}
        per_class.append(ClassMetrics(class_id, tp, fp, fn, tn, values, degenerate))

    macro = {name: float(np.mean([metrics[name] for metrics in per_class])) for name in METRIC_NAMES}
    plain_accuracy = int(np.trace(cm.counts)) / total
    return MetricsReport(cm, per_class, macro, plain_accuracy)


def evaluate_predictions(preds: Sequence[int], truths: Sequence[int], num_classes: int) -> MetricsReport:
    return metrics_from_confusion(confusion(preds, truths, num_classes))


def render_metrics_table(report: MetricsReport, class_names: Sequence[str] = ()) -> str:
    """Accuracy/Precision/Recall/F1/Specificity per class and macro, then plain accuracy."""
    names = list(class_names) or [str(metrics.class_id) for metrics in report.per_class]
    header = ['class'] + [name.capitalize() for name in METRIC_NAMES]
    rows = [header]
    for metrics in report.per_class:
        rows.append([names[metrics.class_id]] + [f"{metrics[name]:.4f}" for name in METRIC_NAMES])
    rows.append(['macro'] + [f"{report.macro[name]:.4f}" for name in METRIC_NAMES])
    widths = [max(len(row[column]) for row in rows) for column in range(len(header))]
    lines = ['  '.join(value.ljust(width) for value, width in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, '  '.join('-' * width for width in widths))
    lines.append('')
    lines.append(f"plain accuracy {report.plain_accuracy:.4f}")
    lines.append('sensitivity ' + ', '.join(f"{names[m.class_id]} {m['recall']:.4f}" for m in report.per_class))
    return '\n'.join(lines) + '\n'
