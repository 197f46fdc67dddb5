"""Grad-CAM per patch and its probability-weighted aggregation over a patch ensemble."""
import logging
from typing import List, Sequence

import numpy as np

from models import (ChannelWeights,
                    CoverageMap,
                    FeatureMaps,
                    IMAGE_SCOPE,
                    LabelMask,
                    ModelParams,
                    PATCH_SCOPE,
                    Patch,
                    PatchPlacement,
                    PatchProbs,
                    RasterImage,
                    SaliencyMap)
from shared import InvalidArgumentError, chunked, ordered_map
from shared.constants import MAX_GRAY
from .core import bilinear
from .infer import DEFAULT_CHUNK, global_input, to_model_input
from .network import PatchClassifier
from .patches import coverage as coverage_of

logger = logging.getLogger(__name__)


def channel_weights(score_gradient: np.ndarray) -> ChannelWeights:
    """alpha_k = (1 / Z) sum_i d y_c / d f_i^k with Z = u * v."""
    gradient = np.asarray(score_gradient, dtype=np.float64)
    if gradient.ndim != 3:
        raise InvalidArgumentError(f"feature gradient must be (k, u, v), got {gradient.shape}")
    Z = gradient.shape[1] * gradient.shape[2]
    return ChannelWeights(gradient.sum(axis=(1, 2)) / Z, Z)


def cam_from_features(features: FeatureMaps, weights: ChannelWeights, p: int, q: int,
                      scope: str = PATCH_SCOPE) -> SaliencyMap:
    """Weighted channel sum, ReLU, bilinear upsampling to p x q, then division by the max."""
    if weights.alpha.size != features.k:
        raise InvalidArgumentError(f"{weights.alpha.size} channel weights for {features.k} channels")
    combined = np.maximum(np.einsum('k,kuv->uv', weights.alpha, features.channels), 0.0)
    upsampled = np.maximum(bilinear(combined, p, q), 0.0)
    peak = upsampled.max()
    if peak > 0.0:
        upsampled = upsampled / peak
    return SaliencyMap(upsampled, scope)


def _check_class(model: PatchClassifier, class_id: int) -> None:
    if not 0 <= class_id < model.num_classes:
        raise InvalidArgumentError(f"class index {class_id} out of range [0, {model.num_classes})")


def grad_cams(patches: Sequence[Patch], params: ModelParams, class_id: int,
              chunk_size: int = DEFAULT_CHUNK) -> List[SaliencyMap]:
    """Patch-level Grad-CAM maps for every patch, evaluated in fixed-size chunks."""
    _check_class(PatchClassifier(params), class_id)

    def run_chunk(chunk: List[Patch]) -> List[SaliencyMap]:
        model = PatchClassifier(params)
        inputs = np.stack([to_model_input(patch, model.input_size) for patch in chunk])
        _, features = model.forward(inputs)
        gradients = model.score_gradient(class_id)
        return [cam_from_features(FeatureMaps(features[index]), channel_weights(gradients[index]),
                                  patch.p, patch.q)
                for index, patch in enumerate(chunk)]

    maps: List[SaliencyMap] = []
    for chunk_maps in ordered_map(run_chunk, chunked(list(patches), chunk_size)):
        maps.extend(chunk_maps)
    return maps


def grad_cam(patch: Patch, params: ModelParams, class_id: int) -> SaliencyMap:
    return grad_cams([patch], params, class_id)[0]


def prob_grad_cam(patch_maps: Sequence[SaliencyMap], probs: PatchProbs, placements: Sequence[PatchPlacement],
                  coverage: CoverageMap, class_id: int) -> SaliencyMap:
    """[l]_i = (1 / K_i) sum_k r^c(x_k) [Q_k(l^c(x_k))]_i, zero where K_i = 0. Not re-normalized."""
    if not (len(patch_maps) == len(placements) == probs.K):
        raise InvalidArgumentError(
            f"misaligned inputs: {len(patch_maps)} maps, {len(placements)} placements, {probs.K} probability rows")
    if not 0 <= class_id < probs.num_classes:
        raise InvalidArgumentError(f"class index {class_id} out of range [0, {probs.num_classes})")
    m, n = coverage.shape
    if not np.array_equal(coverage_of(placements, m, n).counts, coverage.counts):
        raise InvalidArgumentError("coverage map was not computed from these placements")
    weighted = np.zeros((m, n), dtype=np.float64)
    for patch_map, placement, r in zip(patch_maps, placements, probs.column(class_id)):
        if patch_map.shape != (placement.p, placement.q):
            raise InvalidArgumentError(f"map {patch_map.shape} does not match {placement!r}")
        weighted[placement.window()] += r * patch_map.values
    counts = coverage.counts
    values = np.divide(weighted, counts, out=np.zeros_like(weighted), where=counts > 0)
    return SaliencyMap(values, IMAGE_SCOPE)


def global_grad_cam(img: RasterImage, mask: LabelMask, params: ModelParams, class_id: int,
                    masked: bool = True) -> SaliencyMap:
    """Grad-CAM of the global approach, upsampled to the full image."""
    model = PatchClassifier(params)
    _check_class(model, class_id)
    _, features = model.forward(global_input(img, mask, model.input_size, masked))
    gradient = model.score_gradient(class_id)[0]
    return cam_from_features(FeatureMaps(features[0]), channel_weights(gradient), img.height, img.width,
                             IMAGE_SCOPE)


def overlay(img: RasterImage, saliency: SaliencyMap) -> RasterImage:
    """Monochrome composite 0.5 * img + 0.5 * 255 * saliency."""
    if img.shape != saliency.shape:
        raise InvalidArgumentError(f"image {img.shape} and saliency {saliency.shape} dimensions differ")
    return RasterImage(0.5 * img.pixels.astype(np.float64) + 0.5 * MAX_GRAY * saliency.values, (0.0, MAX_GRAY))
