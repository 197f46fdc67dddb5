"""Lung intensity, CTR and inter-/intra-patch markers, compared across classes with rank-sum tests."""
import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models import (BiomarkerConfig,
                    IntensityStats,
                    LabelMask,
                    MarkerTable,
                    ModelParams,
                    PairwiseCell,
                    Patch,
                    PatchConfig,
                    RasterImage)
from shared import InvalidArgumentError, NotComputableError, NoLungError, ordered_map
from shared.constants import CLASS_NAMES, LUNG_LABELS, MAX_GRAY
from .core import apply_mask
from .infer import classify_patches
from .patches import extract_patches
from .segmask import ctr, under_segmentation_flag
from .stats import ks_normality, significance_stars, wilcoxon_rank_sum

logger = logging.getLogger(__name__)

LUNG_MEAN = 'lung_mean'
LUNG_STD = 'lung_std'
CTR = 'ctr'
INTER_PATCH_MEAN = 'inter_patch_mean'
INTRA_PATCH_STD = 'intra_patch_std'
MARKERS = (LUNG_MEAN, LUNG_STD, CTR, INTER_PATCH_MEAN, INTRA_PATCH_STD)
MIN_SAMPLES_PER_CLASS = 3


class MarkerSample:
    """Preprocessed image with its reference mask and, optionally, a predicted mask."""

    def __init__(self, image: RasterImage, mask: LabelMask, predicted_mask: Optional[LabelMask] = None):
        if image.shape != mask.shape:
            raise InvalidArgumentError(f"image {image.shape} and mask {mask.shape} dimensions differ")
        if predicted_mask is not None and predicted_mask.shape != mask.shape:
            raise InvalidArgumentError("predicted and reference masks differ in dimensions")
        self.image = image
        self.mask = mask
        self.predicted_mask = predicted_mask


def lung_intensity_stats(img: RasterImage, mask: LabelMask) -> IntensityStats:
    """Mean and population STD over lung-labelled pixels, in units of 255."""
    if img.shape != mask.shape:
        raise InvalidArgumentError(f"image {img.shape} and mask {mask.shape} dimensions differ")
    values = img.pixels[mask.lung].astype(np.float64) / MAX_GRAY
    if values.size == 0:
        raise NoLungError("lung intensity statistics need at least one lung pixel")
    return IntensityStats(values.mean(), values.std(), values.size)


def patch_intensity_stats(patches: Sequence[Patch]) -> Tuple[List[float], List[float], int]:
    """Per-patch mean and population STD over in-mask (nonzero) pixels, plus the count of empty patches."""
    if len(patches) == 0:
        raise InvalidArgumentError("no patches given")
    inter, intra, excluded = [], [], 0
    for patch in patches:
        values = patch.pixels[patch.pixels != 0].astype(np.float64) / MAX_GRAY
        if values.size == 0:
            excluded += 1
            continue
        inter.append(float(values.mean()))
        intra.append(float(values.std()))
    if not inter:
        raise NotComputableError("every patch lies entirely outside the mask")
    return inter, intra, excluded


class _SampleMarkers:
    def __init__(self, values: Dict[str, List[float]], excluded: int, under_segmented: Optional[bool]):
        self.values = values
        self.excluded = excluded
        self.under_segmented = under_segmented


def _sample_markers(sample: MarkerSample, class_id: int, cfg: BiomarkerConfig, patches: PatchConfig, seed: int,
                    classifier: Optional[ModelParams]) -> _SampleMarkers:
    mask = sample.predicted_mask if cfg.use_predicted_masks and sample.predicted_mask is not None else sample.mask
    values: Dict[str, List[float]] = {marker: [] for marker in MARKERS}
    lung = lung_intensity_stats(sample.image, mask)
    values[LUNG_MEAN].append(lung.mean)
    values[LUNG_STD].append(lung.std)
    try:
        values[CTR].append(ctr(mask))
    except NotComputableError as error:
        logger.debug("CTR skipped: %s", error)

    masked = apply_mask(sample.image, mask, LUNG_LABELS)
    crops, _ = extract_patches(masked, mask, patches.K, patches.p, patches.q, seed)
    if cfg.correct_patches_only:
        predicted = np.argmax(classify_patches(crops, classifier, patches.chunk_size).probs, axis=1)
        kept = [crop for crop, label in zip(crops, predicted) if label == class_id]
    else:
        kept = crops
    excluded = len(crops) - len(kept)
    if kept:
        try:
            inter, intra, empty = patch_intensity_stats(kept)
            values[INTER_PATCH_MEAN].extend(inter)
            values[INTRA_PATCH_STD].extend(intra)
            excluded += empty
        except NotComputableError:
            excluded += len(kept)

    under = None
    if sample.predicted_mask is not None:
        under = under_segmentation_flag(sample.predicted_mask.lung, sample.mask.lung)
    return _SampleMarkers(values, excluded, under)


def marker_report(dataset: Dict[str, Sequence[MarkerSample]], cfg: BiomarkerConfig, patches: PatchConfig,
                  seed: int = 0, classifier: Optional[ModelParams] = None) -> MarkerTable:
    """Markers per class, KS normality per marker and class, and rank-sum tests for every class pair.

    Image i of a class draws its patch centers with seed + i.
    """
    classes = [name for name in CLASS_NAMES if name in dataset] + sorted(set(dataset) - set(CLASS_NAMES))
    if len(classes) < 2:
        raise InvalidArgumentError(f"marker comparison needs at least two classes, got {classes}")
    for name in classes:
        if len(dataset[name]) < MIN_SAMPLES_PER_CLASS:
            raise InvalidArgumentError(
                f"class {name!r} has {len(dataset[name])} samples, at least {MIN_SAMPLES_PER_CLASS} are required")
    if cfg.correct_patches_only and classifier is None:
        raise InvalidArgumentError("the correctly-classified patch filter needs a classifier")

    values: Dict[str, Dict[str, List[float]]] = {marker: {} for marker in MARKERS}
    excluded: Dict[str, int] = {}
    under_segmented: Dict[str, int] = {}
    for name in classes:
        class_id = CLASS_NAMES.index(name) if name in CLASS_NAMES else -1
        results = ordered_map(
            lambda indexed: _sample_markers(indexed[1], class_id, cfg, patches, seed + indexed[0], classifier),
            list(enumerate(dataset[name])))
        for marker in MARKERS:
            values[marker][name] = [value for result in results for value in result.values[marker]]
        excluded[name] = sum(result.excluded for result in results)
        flags = [result.under_segmented for result in results if result.under_segmented is not None]
        if flags:
            under_segmented[name] = int(sum(flags))
        logger.info("markers for %s: %d images, %d patches excluded", name, len(results), excluded[name])

    normality = {marker: {name: _normality(values[marker][name]) for name in classes} for marker in MARKERS}
    pairwise = []
    for marker in MARKERS:
        for class_a, class_b in itertools.combinations(classes, 2):
            sample_a, sample_b = values[marker][class_a], values[marker][class_b]
            if len(sample_a) < MIN_SAMPLES_PER_CLASS or len(sample_b) < MIN_SAMPLES_PER_CLASS:
                logger.warning("skipping %s %s vs %s: too few values", marker, class_a, class_b)
                continue
            result = wilcoxon_rank_sum(sample_a, sample_b)
            pairwise.append(PairwiseCell(marker, class_a, class_b, result, significance_stars(result.p_value)))
    return MarkerTable(classes, values, normality, pairwise, excluded, under_segmented or None)


def _normality(sample: List[float]):
    try:
        return ks_normality(sample)
    except NotComputableError:
        return None


def render_marker_table(table: MarkerTable) -> str:
    """Aligned text: marker | class | mean | std | n | KS p | one p (stars) column per other class."""
    header = ['marker', 'class', 'mean', 'std', 'n', 'KS p'] + [f"vs {name}" for name in table.classes]
    rows = [header]
    for marker in table.markers:
        for name in table.classes:
            sample = np.asarray(table.values[marker][name], dtype=np.float64)
            ks = table.normality[marker][name]
            row = [marker, name,
                   f"{sample.mean():.4f}" if sample.size else '-',
                   f"{sample.std():.4f}" if sample.size else '-',
                   str(sample.size),
                   f"{ks.p_value:.3g}" if ks is not None else '-']
            for other in table.classes:
                if other == name:
                    row.append('')
                    continue
                try:
                    cell = table.cell(marker, name, other)
                    row.append(f"{cell.result.p_value:.3g} ({cell.stars})")
                except KeyError:
                    row.append('-')
            rows.append(row)
    widths = [max(len(row[column]) for row in rows) for column in range(len(header))]
    lines = ['  '.join(value.ljust(width) for value, width in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, '  '.join('-' * width for width in widths))
    if table.under_segmented:
        lines.append('')
        lines.append('under-segmented: ' + ', '.join(f"{name} {count}" for name, count in table.under_segmented.items()))
    return '\n'.join(lines) + '\n'
