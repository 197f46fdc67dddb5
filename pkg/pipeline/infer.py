"""Patch-ensemble inference with majority voting, and the global-approach baseline."""
import logging
from typing import List, Sequence, Tuple

import numpy as np

from models import (LabeledImage,
                    LabelMask,
                    LocalClassification,
                    ModelParams,
                    Patch,
                    PatchConfig,
                    PatchProbs,
                    PatchSet,
                    PreprocessConfig,
                    RasterImage,
                    Verdict)
from shared import InvalidArgumentError, chunked, ordered_map
from shared.constants import LUNG_LABELS, MAX_GRAY
from .core import apply_mask, resize_image, resize_mask
from .network import PatchClassifier, softmax
from .patches import extract_patches
from .preprocess import preprocess_pipeline

logger = logging.getLogger(__name__)

LOCAL_APPROACH = 'local'
GLOBAL_APPROACH = 'global'
APPROACHES = (LOCAL_APPROACH, GLOBAL_APPROACH)
DEFAULT_CHUNK = 16


def to_model_input(pixels, input_size: int) -> np.ndarray:
    """Resize a [0, 255] grid to input_size x input_size and scale it to [0, 1]."""
    if isinstance(pixels, Patch):
        pixels = pixels.pixels
    image = RasterImage(pixels)
    if image.shape != (input_size, input_size):
        image = resize_image(image, input_size, input_size)
    return image.pixels.astype(np.float64) / MAX_GRAY


def predict_inputs(inputs: np.ndarray, params: ModelParams, chunk_size: int = DEFAULT_CHUNK) -> np.ndarray:
    """Softmax rows for a stack of model inputs, evaluated in fixed-size chunks."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[0] == 0:
        raise InvalidArgumentError(f"expected a non-empty (N, s, s) input stack, got {inputs.shape}")
    starts = list(range(0, inputs.shape[0], chunk_size))

    def run_chunk(start: int) -> np.ndarray:
        logits, _ = PatchClassifier(params).forward(inputs[start:start + chunk_size])
        return softmax(logits)

    return np.concatenate(ordered_map(run_chunk, starts), axis=0)


def classify_patches(patches: Sequence[Patch], params: ModelParams, chunk_size: int = DEFAULT_CHUNK) -> PatchProbs:
    if len(patches) == 0:
        raise InvalidArgumentError("cannot classify an empty patch list")
    input_size = PatchClassifier(params).input_size
    chunks = chunked(list(patches), chunk_size)
    stacks = ordered_map(lambda chunk: np.stack([to_model_input(patch, input_size) for patch in chunk]), chunks)
    return PatchProbs(predict_inputs(np.concatenate(stacks, axis=0), params, chunk_size))


def majority_vote(probs: PatchProbs) -> Verdict:
    """Argmax votes; ties go to the larger summed probability, then to the lowest class index."""
    rows = probs.probs
    votes = np.bincount(np.argmax(rows, axis=1), minlength=probs.num_classes)
    tied = np.flatnonzero(votes == votes.max())
    if tied.size == 1:
        winner = int(tied[0])
    else:
        summed = rows.sum(axis=0)
        winner = int(tied[np.argmax(summed[tied])])
    return Verdict(winner, votes, rows.mean(axis=0))


def classify_image(img: RasterImage, mask: LabelMask, params: ModelParams, K: int, p: int, q: int,
                   seed: int, chunk_size: int = DEFAULT_CHUNK) -> LocalClassification:
    patches, placements = extract_patches(img, mask, K, p, q, seed)
    probs = classify_patches(patches, params, chunk_size)
    verdict = majority_vote(probs)
    logger.debug("local verdict %s over K=%d (seed %d)", verdict, K, seed)
    return LocalClassification(verdict, probs, placements, seed, img.shape)


def global_input(img: RasterImage, mask: LabelMask, input_size: int, masked: bool = True) -> np.ndarray:
    if masked:
        img = apply_mask(img, mask, LUNG_LABELS)
    return to_model_input(img.pixels, input_size)


def classify_global(img: RasterImage, mask: LabelMask, params: ModelParams, masked: bool = True) -> np.ndarray:
    """Class probabilities of the whole masked image resized to the model input."""
    model = PatchClassifier(params)
    logits, _ = model.forward(global_input(img, mask, model.input_size, masked))
    return softmax(logits)[0]


def prepare_image(item: LabeledImage, preprocess: PreprocessConfig, masked: bool) -> Tuple[RasterImage, LabelMask]:
    """Preprocess at classification resolution and resample the mask to match."""
    cfg = preprocess.for_classification()
    img = preprocess_pipeline(item.raw, cfg)
    mask = item.mask if item.mask.shape == img.shape else resize_mask(item.mask, *img.shape)
    if masked:
        img = apply_mask(img, mask, LUNG_LABELS)
    return img, mask


def build_patch_sets(items: Sequence[LabeledImage], preprocess: PreprocessConfig, patches: PatchConfig,
                     approach: str, patches_per_image: int, seed: int) -> PatchSet:
    """Model-resolution inputs for training or validation; image i draws its centers with seed + i."""
    if approach not in APPROACHES:
        raise InvalidArgumentError(f"approach must be one of {APPROACHES}, got {approach!r}")
    if len(items) == 0:
        raise InvalidArgumentError("cannot build a patch set from zero images")

    def build_one(indexed: Tuple[int, LabeledImage]) -> np.ndarray:
        index, item = indexed
        img, mask = prepare_image(item, preprocess, patches.apply_mask)
        if approach == GLOBAL_APPROACH:
            return to_model_input(img.pixels, patches.input_size)[None]
        crops, _ = extract_patches(img, mask, patches_per_image, patches.p, patches.q, seed + index)
        return np.stack([to_model_input(crop, patches.input_size) for crop in crops])

    stacks: List[np.ndarray] = ordered_map(build_one, list(enumerate(items)))
    labels = np.concatenate([np.full(len(stack), item.class_id) for stack, item in zip(stacks, items)])
    groups = np.concatenate([np.full(len(stack), index) for index, stack in enumerate(stacks)])
    patch_set = PatchSet(np.concatenate(stacks, axis=0), labels, groups)
    logger.info("built %s (%s approach)", patch_set, approach)
    return patch_set


def vote_patch_set(patch_set: PatchSet, params: ModelParams,
                   chunk_size: int = DEFAULT_CHUNK) -> Tuple[List[int], List[int]]:
    """Per-image majority-vote predictions and truths over a patch set."""
    probs = predict_inputs(patch_set.inputs, params, chunk_size)
    preds, truths = [], []
    for group in patch_set.group_ids():
        rows = patch_set.groups == group
        preds.append(majority_vote(PatchProbs(probs[rows])).predicted_class)
        truths.append(patch_set.group_label(group))
    return preds, truths
