"""Mask geometry and evaluation: Jaccard, CTR, under-segmentation, lung coordinates."""
from typing import Dict, List, Sequence, Tuple

import numpy as np

from models import LabelMask, MaskStats, TestResult
from shared import InvalidArgumentError, NotComputableError
from shared.constants import UNDER_SEGMENTATION_FRACTION
from .stats import wilcoxon_signed_rank


def _as_binary(mask) -> np.ndarray:
    return np.asarray(mask).astype(bool)


def jaccard(a, b) -> float:
    """|a & b| / |a | b|; two empty masks agree vacuously (1.0)."""
    a, b = _as_binary(a), _as_binary(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"mask dimensions differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def jaccard_per_structure(predicted: LabelMask, reference: LabelMask) -> Dict[str, float]:
    if predicted.shape != reference.shape:
        raise InvalidArgumentError(f"mask dimensions differ: {predicted.shape} vs {reference.shape}")
    return {
        'lung': jaccard(predicted.lung, reference.lung),
        'heart': jaccard(predicted.heart, reference.heart),
    }


def _row_spans(binary: np.ndarray) -> np.ndarray:
    """Per row: rightmost - leftmost + 1 over set pixels (0 for empty rows)."""
    width = binary.shape[1]
    occupied = binary.any(axis=1)
    first = np.argmax(binary, axis=1)
    last = width - 1 - np.argmax(binary[:, ::-1], axis=1)
    return np.where(occupied, last - first + 1, 0)


def mask_stats(mask: LabelMask) -> MaskStats:
    heart, lung = mask.heart, mask.lung
    cardiac = int(_row_spans(heart).max()) if heart.any() else 0
    thoracic = int(_row_spans(lung).max()) if lung.any() else 0
    return MaskStats(lung_area=int(np.count_nonzero(lung)), heart_area=int(np.count_nonzero(heart)),
                     cardiac_width=cardiac, thoracic_width=thoracic)


def ctr(mask: LabelMask) -> float:
    """Maximal transverse cardiac span over maximal lung-to-lung span, both taken per row."""
    stats = mask_stats(mask)
    if stats.heart_area == 0:
        raise NotComputableError("CTR needs at least one heart pixel")
    if stats.lung_area == 0:
        raise NotComputableError("CTR needs at least one lung pixel")
    return stats.cardiac_width / stats.thoracic_width


def under_segmentation_flag(predicted, reference) -> bool:
    """True when more than a quarter of the reference lung is missing from the prediction."""
    predicted, reference = _as_binary(predicted), _as_binary(reference)
    if predicted.shape != reference.shape:
        raise InvalidArgumentError(f"mask dimensions differ: {predicted.shape} vs {reference.shape}")
    reference_area = np.count_nonzero(reference)
    if reference_area == 0:
        raise InvalidArgumentError("reference lung mask is empty")
    missing = np.count_nonzero(reference & ~predicted)
    return missing / reference_area > UNDER_SEGMENTATION_FRACTION


def lung_pixel_array(mask: LabelMask) -> np.ndarray:
    """(N, 2) array of lung pixel (row, col) in row-major order."""
    return np.argwhere(mask.lung)


def lung_pixel_coords(mask: LabelMask) -> List[Tuple[int, int]]:
    return [(int(row), int(col)) for row, col in lung_pixel_array(mask)]


def compare_segmentations(jaccards_a: Sequence[float], jaccards_b: Sequence[float]) -> TestResult:
    """Paired signed-rank comparison of two segmentation runs over the same images."""
    return wilcoxon_signed_rank(jaccards_a, jaccards_b)
