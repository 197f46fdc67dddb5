"""Synthetic chest radiographs with analytic anatomy masks and class-specific lesion layers.

Anatomy: air outside an elliptic body of soft tissue, two dark lung ellipses
with a horizontal rib texture, and a bright heart ellipse drawn over the
medial lung edges. Lesion layers: normal has none; bacterial is one large
bright opacity over most of one lung that may spill outside it; tb is 2-5
small bright nodules in the upper third of each lung; viral_covid is 4-10
dark diffuse blobs on both lungs, biased to the periphery.
"""
import hashlib
import json
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from skimage.draw import disk, ellipse

from models import LabelMask, LesionParams, Phantom, PhantomSpec
from infrastructures import DatasetRepo
from shared import InvalidArgumentError, ordered_map
from shared.constants import (LABEL_BACKGROUND,
                              LABEL_HEART,
                              LABEL_LEFT_LUNG,
                              LABEL_RIGHT_LUNG,
                              MAX_GRAY,
                              SPLIT_RATIOS)
from .segmask import mask_stats

logger = logging.getLogger(__name__)

MIN_PER_CLASS = 10


def _ellipse_fits(spec: PhantomSpec, center_row: float, center_col: float, semi_rows: float,
                  semi_cols: float, what: str) -> None:
    if (center_row - semi_rows < 0.0 or center_row + semi_rows > 1.0
            or center_col - semi_cols < 0.0 or center_col + semi_cols > 1.0):
        raise InvalidArgumentError(f"{what} ellipse does not fit inside the {spec.size}px image")


def _lung_centers(spec: PhantomSpec) -> Dict[int, Tuple[float, float]]:
    # the patient's left lung is on the image right
    return {
        LABEL_RIGHT_LUNG: (spec.lung_center_row, 0.5 - spec.lung_offset_col),
        LABEL_LEFT_LUNG: (spec.lung_center_row, 0.5 + spec.lung_offset_col),
    }


def _check_geometry(spec: PhantomSpec) -> None:
    _ellipse_fits(spec, 0.5, 0.5, spec.body_semi_rows, spec.body_semi_cols, 'body')
    for row, col in _lung_centers(spec).values():
        _ellipse_fits(spec, row, col, spec.lung_semi_rows, spec.lung_semi_cols, 'lung')
    _ellipse_fits(spec, spec.heart_center_row, spec.heart_center_col, spec.heart_semi_rows,
                  spec.heart_half_width, 'heart')
    if spec.lung_offset_col < spec.lung_semi_cols:
        raise InvalidArgumentError("lung ellipses overlap at the midline")


def _draw_anatomy(spec: PhantomSpec) -> Tuple[np.ndarray, np.ndarray]:
    size = spec.size
    image = np.full((size, size), spec.air_level, dtype=np.float64)
    labels = np.full((size, size), LABEL_BACKGROUND, dtype=np.uint8)

    rows, cols = ellipse(0.5 * size, 0.5 * size, spec.body_semi_rows * size, spec.body_semi_cols * size,
                         shape=image.shape)
    image[rows, cols] = spec.tissue_level

    ribs = spec.rib_amplitude * np.sin(2.0 * np.pi * np.arange(size) / (spec.rib_period * size))
    for label, (center_row, center_col) in _lung_centers(spec).items():
        rows, cols = ellipse(center_row * size, center_col * size, spec.lung_semi_rows * size,
                             spec.lung_semi_cols * size, shape=image.shape)
        image[rows, cols] = spec.lung_level + ribs[rows]
        labels[rows, cols] = label

    rows, cols = ellipse(spec.heart_center_row * size, spec.heart_center_col * size, spec.heart_semi_rows * size,
                         spec.heart_half_width * size, shape=image.shape)
    image[rows, cols] = spec.heart_level
    labels[rows, cols] = LABEL_HEART
    return image, labels


def _add_bacterial(spec: PhantomSpec, image: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> bool:
    """One bright opacity over most of one lung, shifted toward its lateral border."""
    size = spec.size
    lung_label = LABEL_LEFT_LUNG if rng.random() < 0.5 else LABEL_RIGHT_LUNG
    center_row, center_col = _lung_centers(spec)[lung_label]
    lateral = 1.0 if lung_label == LABEL_LEFT_LUNG else -1.0
    row = (center_row + rng.uniform(0.0, 0.2) * spec.lung_semi_rows) * size
    col = (center_col + lateral * 0.3 * spec.lung_semi_cols) * size
    # radius range scales the lung semi-axes
    semi_rows = rng.uniform(*spec.lesion_params.radius) * spec.lung_semi_rows * size
    semi_cols = rng.uniform(*spec.lesion_params.radius) * spec.lung_semi_cols * size
    contrast = rng.uniform(*spec.lesion_params.contrast)
    rows, cols = ellipse(row, col, max(semi_rows, 1.0), max(semi_cols, 1.0), shape=image.shape)
    image[rows, cols] += contrast
    inside = np.isin(labels[rows, cols], (LABEL_LEFT_LUNG, LABEL_RIGHT_LUNG))
    return bool(inside.any() and (~inside).any())


def _add_nodules(spec: PhantomSpec, image: np.ndarray, labels: np.ndarray, rng: np.random.Generator,
                 counts: Tuple[int, int]) -> int:
    """counts[0] nodules in the right lung and counts[1] in the left; returns the total."""
    size = spec.size
    lung = np.isin(labels, (LABEL_LEFT_LUNG, LABEL_RIGHT_LUNG))
    centers = _lung_centers(spec)
    for lung_label, lung_count in zip((LABEL_RIGHT_LUNG, LABEL_LEFT_LUNG), counts):
        center_row, center_col = centers[lung_label]
        for _ in range(lung_count):
            # upper third of the lung height
            row = (center_row - spec.lung_semi_rows + rng.uniform(0.15, 2.0 / 3.0) * spec.lung_semi_rows) * size
            col = (center_col + rng.uniform(-0.6, 0.6) * spec.lung_semi_cols) * size
            radius = rng.uniform(*spec.lesion_params.radius) * size
            contrast = rng.uniform(*spec.lesion_params.contrast)
            rows, cols = disk((row, col), max(radius, 1.0), shape=image.shape)
            inside = lung[rows, cols]
            image[rows[inside], cols[inside]] += contrast
    return int(sum(counts))


def _add_diffuse_blobs(spec: PhantomSpec, image: np.ndarray, labels: np.ndarray, rng: np.random.Generator,
                       count: int) -> None:
    size = spec.size
    lung = np.isin(labels, (LABEL_LEFT_LUNG, LABEL_RIGHT_LUNG))
    grid_rows, grid_cols = np.mgrid[0:size, 0:size].astype(np.float64)
    centers = _lung_centers(spec)
    for index in range(count):
        # alternate sides so both lungs are affected
        lung_label = LABEL_LEFT_LUNG if index % 2 == 0 else LABEL_RIGHT_LUNG
        center_row, center_col = centers[lung_label]
        lateral = 1.0 if lung_label == LABEL_LEFT_LUNG else -1.0
        row = (center_row + rng.uniform(-0.7, 0.7) * spec.lung_semi_rows) * size
        col = (center_col + lateral * rng.uniform(0.3, 0.9) * spec.lung_semi_cols) * size
        sigma = rng.uniform(*spec.lesion_params.radius) * size
        contrast = rng.uniform(*spec.lesion_params.contrast)
        blob = contrast * np.exp(-((grid_rows - row) ** 2 + (grid_cols - col) ** 2) / (2.0 * sigma ** 2))
        image[lung] += blob[lung]


def _draw_count(lesions: LesionParams, rng: np.random.Generator) -> int:
    return int(rng.integers(lesions.count[0], lesions.count[1] + 1)) if lesions.count[1] > 0 else 0


def gen_phantom(spec: PhantomSpec) -> Phantom:
    """Render one phantom; spec and seed fully determine the image and mask bytes."""
    _check_geometry(spec)
    rng = np.random.default_rng(spec.seed)
    image, labels = _draw_anatomy(spec)

    lesions = spec.lesion_params
    count = _draw_count(lesions, rng)
    straddles = False
    if spec.label == 'tb':
        # the count range applies to each lung
        count = _add_nodules(spec, image, labels, rng, (count, _draw_count(lesions, rng)))
    elif count:
        if spec.label == 'bacterial':
            straddles = _add_bacterial(spec, image, labels, rng)
        elif spec.label == 'viral_covid':
            _add_diffuse_blobs(spec, image, labels, rng, count)

    if spec.noise_sigma > 0.0:
        image += rng.normal(0.0, spec.noise_sigma, image.shape)
    raw = np.clip(np.rint(image), 0.0, MAX_GRAY).astype(np.uint8)
    mask = LabelMask(labels)
    return Phantom(spec, raw, mask, mask_stats(mask), straddles, count)


def split_counts(n: int) -> Dict[str, int]:
    """Per-class split sizes: train and val rounded from the ratios, test takes the rest."""
    counts = {}
    for name, ratio in SPLIT_RATIOS[:-1]:
        counts[name] = int(round(ratio * n))
    counts[SPLIT_RATIOS[-1][0]] = n - sum(counts.values())
    return counts


def item_seeds(seed: int, count: int) -> List[int]:
    """Independent per-item seeds spawned from the master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def plan_dataset(n_per_class: int, specs: Dict[str, PhantomSpec], seed: int) -> List[Tuple[PhantomSpec, str]]:
    """(per-item spec, split) for every phantom, stratified per class, in class then index order."""
    if n_per_class < MIN_PER_CLASS:
        raise InvalidArgumentError(f"n_per_class must be >= {MIN_PER_CLASS}, got {n_per_class}")
    if not specs:
        raise InvalidArgumentError("no phantom classes configured")
    counts = split_counts(n_per_class)
    split_rng = np.random.default_rng(seed)
    seeds = item_seeds(seed, n_per_class * len(specs))
    plan = []
    for class_index, (label, spec) in enumerate(specs.items()):
        splits = np.empty(n_per_class, dtype=object)
        order = split_rng.permutation(n_per_class)
        start = 0
        for name, _ in SPLIT_RATIOS:
            splits[order[start:start + counts[name]]] = name
            start += counts[name]
        for index in range(n_per_class):
            plan.append((spec.with_seed(seeds[class_index * n_per_class + index]), str(splits[index])))
    return plan


def specs_digest(specs: Dict[str, PhantomSpec]) -> str:
    payload = json.dumps({label: spec.digest() for label, spec in specs.items()}, sort_keys=True,
                         separators=(',', ':')).encode('utf-8')
    return hashlib.sha256(payload).hexdigest()


def gen_dataset(n_per_class: int, specs: Dict[str, PhantomSpec], seed: int, root: str,
                repo: Optional[DatasetRepo] = None) -> str:
    """Render every planned phantom, write images, masks and the manifest; returns the manifest path."""
    plan = plan_dataset(n_per_class, specs, seed)
    repo = repo if repo is not None else DatasetRepo(root)
    phantoms = ordered_map(lambda entry: gen_phantom(entry[0]), plan)
    entries = [repo.save_phantom(index, phantom, split) for index, (phantom, (_, split)) in
               enumerate(zip(phantoms, plan))]
    manifest_path = repo.save_manifest(entries, seed, specs_digest(specs))
    logger.info("generated %d phantoms (%d per class) into %s", len(entries), n_per_class, root)
    return manifest_path
