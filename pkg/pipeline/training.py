"""Adam optimizer and the training loops of the classifier and the segmenter."""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models import (ClassWeights,
                    LabelMask,
                    ModelParams,
                    PatchSet,
                    RasterImage,
                    SegmenterConfig,
                    TrainConfig,
                    TrainingResult)
from shared import InvalidArgumentError
from shared.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, CLASS_NAMES, NUM_CLASSES
from .infer import DEFAULT_CHUNK, vote_patch_set
from .metrics import evaluate_predictions
from .network import (PatchClassifier,
                      PixelSegmenter,
                      inverse_frequency_weights,
                      segmenter_features)
from .segmask import jaccard

logger = logging.getLogger(__name__)


class AdamState:
    """First and second moment estimates per tensor plus the step counter."""

    def __init__(self, params: ModelParams):
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}
        self.t = 0

    def copy(self) -> 'AdamState':
        clone = AdamState.__new__(AdamState)
        clone.m = {name: value.copy() for name, value in self.m.items()}
        clone.v = {name: value.copy() for name, value in self.v.items()}
        clone.t = self.t
        return clone


def adam_step(params: ModelParams, grads: Dict[str, np.ndarray], state: AdamState, learning_rate: float,
              weight_decay: float = 0.0) -> Tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; weight decay enters the gradient as weight_decay * w."""
    if set(grads) != set(params.names()):
        raise InvalidArgumentError(f"gradient names {sorted(grads)} do not match parameters {params.names()}")
    updated, state = params.copy(), state.copy()
    state.t += 1
    bias1 = 1.0 - ADAM_BETA1 ** state.t
    bias2 = 1.0 - ADAM_BETA2 ** state.t
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != value.shape:
            raise InvalidArgumentError(f"gradient of {name!r} has shape {grad.shape}, expected {value.shape}")
        if weight_decay:
            grad = grad + weight_decay * value
        state.m[name] = ADAM_BETA1 * state.m[name] + (1.0 - ADAM_BETA1) * grad
        state.v[name] = ADAM_BETA2 * state.v[name] + (1.0 - ADAM_BETA2) * grad * grad
        step = learning_rate * (state.m[name] / bias1) / (np.sqrt(state.v[name] / bias2) + ADAM_EPSILON)
        updated.update(name, value - step)
    return updated, state


def stratified_subset(labels: Sequence[int], fraction: float, seed: int) -> np.ndarray:
    """Sorted indices keeping round(fraction * n_c) (at least one) items of every class c."""
    labels = np.asarray(labels, dtype=np.int64)
    if fraction >= 1.0:
        return np.arange(labels.size)
    rng = np.random.default_rng(seed)
    keep = []
    for class_id in np.unique(labels):
        members = np.flatnonzero(labels == class_id)
        count = max(1, int(round(fraction * members.size)))
        keep.extend(rng.permutation(members)[:count].tolist())
    return np.array(sorted(keep), dtype=np.int64)


def _reduce_train_set(train: PatchSet, fraction: float, seed: int) -> PatchSet:
    if fraction >= 1.0:
        return train
    groups = train.group_ids()
    labels = [train.group_label(group) for group in groups]
    kept = groups[stratified_subset(labels, fraction, seed)]
    reduced = train.select_groups(kept)
    logger.info("train fraction %.2f keeps %d of %d images", fraction, kept.size, groups.size)
    return reduced


def validation_scores(params: ModelParams, val: PatchSet, num_classes: int = NUM_CLASSES,
                      chunk_size: int = DEFAULT_CHUNK) -> Tuple[float, float]:
    """(plain accuracy, macro F1) of per-image majority votes."""
    preds, truths = vote_patch_set(val, params, chunk_size)
    report = evaluate_predictions(preds, truths, num_classes)
    return report.plain_accuracy, report.macro['f1']


def train_classifier(train: PatchSet, val: PatchSet, cfg: TrainConfig, num_classes: int = NUM_CLASSES,
                     chunk_size: int = DEFAULT_CHUNK) -> TrainingResult:
    """Mini-batch Adam with early stopping on validation macro F1; returns the best epoch's parameters."""
    if len(train) == 0 or len(val) == 0:
        raise InvalidArgumentError("training and validation sets must be non-empty")
    if train.input_size != val.input_size:
        raise InvalidArgumentError(f"train inputs are {train.input_size}px but validation inputs {val.input_size}px")
    train = _reduce_train_set(train, cfg.train_fraction, cfg.seed)
    params = PatchClassifier.init_params(cfg.seed, num_classes, train.input_size)
    state = AdamState(params)
    rng = np.random.default_rng(cfg.seed)

    best_params, best_f1, best_epoch, wait = params.copy(), -np.inf, 0, 0
    curves: List[Dict[str, float]] = []
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(train))
        total_loss = 0.0
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            model = PatchClassifier(params)
            logits, _ = model.forward(train.inputs[batch])
            total_loss += model.loss(logits, train.labels[batch], cfg.l1_coeff) * batch.size
            grads = model.backward(train.labels[batch], cfg.l1_coeff)
            params, state = adam_step(params, grads, state, cfg.learning_rate, cfg.weight_decay)

        val_accuracy, val_f1 = validation_scores(params, val, num_classes, chunk_size)
        curves.append({'epoch': epoch, 'train_loss': total_loss / order.size,
                       'val_accuracy': val_accuracy, 'val_f1': val_f1})
        logger.info("classifier epoch %d: loss %.4f, val accuracy %.3f, val F1 %.3f",
                    epoch, total_loss / order.size, val_accuracy, val_f1)
        if val_f1 > best_f1:
            best_params, best_f1, best_epoch, wait = params.copy(), val_f1, epoch, 0
        else:
            wait += 1
            if wait > cfg.patience:
                logger.info("early stop after epoch %d, best epoch %d", epoch, best_epoch)
                break
    return TrainingResult(best_params, curves, best_epoch, best_f1, 'val_f1')


def _segmenter_arrays(items: Sequence[Tuple[RasterImage, LabelMask]]) -> List[Tuple[RasterImage, np.ndarray]]:
    arrays = []
    for img, mask in items:
        if img.shape != mask.shape:
            raise InvalidArgumentError(f"image {img.shape} and mask {mask.shape} dimensions differ")
        arrays.append((img, mask.labels.ravel().astype(np.int64)))
    return arrays


def mean_lung_jaccard(params: ModelParams, items: Sequence[Tuple[RasterImage, LabelMask]]) -> float:
    segmenter = PixelSegmenter(params)
    return float(np.mean([jaccard(segmenter.predict(img).lung, mask.lung) for img, mask in items]))


def select_segmenter_items(items: Sequence[Tuple[RasterImage, LabelMask, str]],
                           classes: Sequence[str]) -> List[Tuple[RasterImage, LabelMask]]:
    unknown = sorted(set(classes) - set(CLASS_NAMES))
    if unknown:
        raise InvalidArgumentError(f"unknown classes {unknown}")
    return [(img, mask) for img, mask, label in items if label in classes]


def train_segmenter(train: Sequence[Tuple[RasterImage, LabelMask]], val: Sequence[Tuple[RasterImage, LabelMask]],
                    cfg: SegmenterConfig, weights: Optional[ClassWeights] = None) -> TrainingResult:
    """Adam on the class-weighted cross entropy over per-epoch pixel subsamples.

    The learning rate drops by lr_factor when the epoch loss has not improved for
    lr_patience epochs; training stops early on validation lung Jaccard.
    """
    if len(train) == 0 or len(val) == 0:
        raise InvalidArgumentError("segmenter training and validation sets must be non-empty")
    keep = stratified_subset(np.zeros(len(train), dtype=np.int64), cfg.train_fraction, cfg.seed)
    train = [train[index] for index in keep]
    arrays = _segmenter_arrays(train)
    if weights is None:
        weights = inverse_frequency_weights(labels for _, labels in arrays)
    lambda_s = weights.lambda_s
    logger.info("segmenter class weights %s over %d training images", weights, len(arrays))

    params = PixelSegmenter.init_params(cfg.seed)
    state = AdamState(params)
    rng = np.random.default_rng(cfg.seed)
    learning_rate = cfg.learning_rate

    best_params, best_jaccard, best_epoch, wait = params.copy(), -np.inf, 0, 0
    best_loss, loss_wait = np.inf, 0
    curves: List[Dict[str, float]] = []
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(arrays))
        epoch_loss, epoch_pixels = 0.0, 0
        for start in range(0, order.size, cfg.batch_size):
            features, labels = [], []
            for index in order[start:start + cfg.batch_size]:
                img, item_labels = arrays[index]
                count = min(cfg.pixels_per_image, item_labels.size)
                picks = rng.choice(item_labels.size, size=count, replace=False)
                # recomputed per visit, only the raster is held
                features.append(segmenter_features(img)[picks])
                labels.append(item_labels[picks])
            features, labels = np.concatenate(features), np.concatenate(labels)
            loss, grads = PixelSegmenter(params).loss_and_grads(features, labels, lambda_s, cfg.l1_coeff)
            grads = {name: grad / labels.size for name, grad in grads.items()}
            params, state = adam_step(params, grads, state, learning_rate, cfg.weight_decay)
            epoch_loss += loss
            epoch_pixels += labels.size

        mean_loss = epoch_loss / epoch_pixels
        val_jaccard = mean_lung_jaccard(params, val)
        curves.append({'epoch': epoch, 'train_loss': mean_loss, 'val_lung_jaccard': val_jaccard,
                       'learning_rate': learning_rate})
        logger.info("segmenter epoch %d: loss %.4f, val lung Jaccard %.4f, lr %.2e",
                    epoch, mean_loss, val_jaccard, learning_rate)

        if mean_loss < best_loss:
            best_loss, loss_wait = mean_loss, 0
        else:
            loss_wait += 1
            if loss_wait >= cfg.lr_patience:
                learning_rate /= cfg.lr_factor
                loss_wait = 0
                logger.info("segmenter loss plateau, learning rate now %.2e", learning_rate)

        if val_jaccard > best_jaccard:
            best_params, best_jaccard, best_epoch, wait = params.copy(), val_jaccard, epoch, 0
        else:
            wait += 1
            if wait > cfg.patience:
                logger.info("early stop after epoch %d, best epoch %d", epoch, best_epoch)
                break
    return TrainingResult(best_params, curves, best_epoch, best_jaccard, 'val_lung_jaccard',
                          extra={'class_weights': weights.to_list()})
