"""Reference networks written in numpy.

PatchClassifier: two 3x3 stride-2 convolutions (8 then 16 channels) with
ReLU, global average pooling and a linear head. The second convolution's
ReLU output is the Grad-CAM feature layer.

PixelSegmenter: per-pixel multinomial logistic regression over a fixed local
feature vector, trained with the class-weighted cross entropy.

Every layer is a forward/backward pair; backward consumes the cache the
forward stored.
"""
import logging
from typing import Dict, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from models import (ClassWeights,
                    FeatureMaps,
                    LabelMask,
                    Logits,
                    ModelParams,
                    Patch,
                    RasterImage,
                    SegPrediction)
from shared import InvalidArgumentError, PreconditionError
from shared.constants import MAX_GRAY, MODEL_INPUT_SIZE, NUM_CLASSES, NUM_LABELS, PROB_CLAMP

logger = logging.getLogger(__name__)

KERNEL = 3
STRIDE = 2
CONV1_CHANNELS = 8
CONV2_CHANNELS = 16
CLASSIFIER_KIND = 'patch_classifier'
SEGMENTER_KIND = 'pixel_segmenter'
CLASSIFIER_WEIGHTS = ('conv1_w', 'conv2_w', 'fc_w')
SEGMENTER_WEIGHTS = ('seg_w',)
NUM_BANDS = 8
CONTEXT_WINDOW = 15
SEGMENTER_FEATURES = (('intensity', 'mean3', 'std3', 'mean15')
                      + tuple(f'band{index}' for index in range(NUM_BANDS))
                      + ('row', 'row_sq', 'col', 'col_sq', 'row_col'))


def softmax(logits: Union[Logits, np.ndarray]) -> np.ndarray:
    """Max-subtracted softmax over the last axis."""
    scores = logits.scores if isinstance(logits, Logits) else np.asarray(logits, dtype=np.float64)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def conv_output_size(size: int) -> int:
    return (size - KERNEL) // STRIDE + 1


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x (N, Cin, H, W), w (Cout, Cin, 3, 3) -> (N, Cout, Ho, Wo); valid padding, stride 2."""
    windows = sliding_window_view(x, (KERNEL, KERNEL), axis=(2, 3))[:, :, ::STRIDE, ::STRIDE]
    out = np.einsum('nchwij,kcij->nkhw', windows, w) + b[None, :, None, None]
    return out, (x, w)


def conv_backward(dout: np.ndarray, cache):
    x, w = cache
    windows = sliding_window_view(x, (KERNEL, KERNEL), axis=(2, 3))[:, :, ::STRIDE, ::STRIDE]
    dw = np.einsum('nkhw,nchwij->kcij', dout, windows)
    db = dout.sum(axis=(0, 2, 3))
    dx = np.zeros_like(x)
    out_h, out_w = dout.shape[2], dout.shape[3]
    for i in range(KERNEL):
        for j in range(KERNEL):
            dx[:, :, i:i + STRIDE * out_h:STRIDE, j:j + STRIDE * out_w:STRIDE] += \
                np.einsum('nkhw,kc->nchw', dout, w[:, :, i, j])
    return dx, dw, db


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0.0), x


def relu_backward(dout: np.ndarray, cache) -> np.ndarray:
    return np.where(cache > 0.0, dout, 0.0)


def l1_penalty(params: ModelParams, weight_names, l1_coeff: float) -> float:
    if l1_coeff == 0.0:
        return 0.0
    return l1_coeff * float(sum(np.abs(params[name]).sum() for name in weight_names))


def add_l1_gradient(grads: Dict[str, np.ndarray], params: ModelParams, weight_names, l1_coeff: float) -> None:
    if l1_coeff == 0.0:
        return
    for name in weight_names:
        grads[name] = grads[name] + l1_coeff * np.sign(params[name])


class PatchClassifier:
    """Forward/backward of the reference patch classifier over a batch (N, H, W) in [0, 1]."""

    def __init__(self, params: ModelParams):
        if params.kind != CLASSIFIER_KIND:
            raise InvalidArgumentError(f"expected {CLASSIFIER_KIND} parameters, got {params.kind!r}")
        self.params = params
        self.input_size = int(params.meta.get('input_size', MODEL_INPUT_SIZE))
        self.num_classes = params['fc_b'].shape[0]
        self._cache = None

    @staticmethod
    def init_params(seed: int, num_classes: int = NUM_CLASSES, input_size: int = MODEL_INPUT_SIZE) -> ModelParams:
        rng = np.random.default_rng(seed)
        tensors = {
            'conv1_w': rng.normal(0.0, np.sqrt(2.0 / (KERNEL * KERNEL)), (CONV1_CHANNELS, 1, KERNEL, KERNEL)),
            'conv1_b': np.zeros(CONV1_CHANNELS),
            'conv2_w': rng.normal(0.0, np.sqrt(2.0 / (CONV1_CHANNELS * KERNEL * KERNEL)),
                                  (CONV2_CHANNELS, CONV1_CHANNELS, KERNEL, KERNEL)),
            'conv2_b': np.zeros(CONV2_CHANNELS),
            'fc_w': rng.normal(0.0, np.sqrt(1.0 / CONV2_CHANNELS), (CONV2_CHANNELS, num_classes)),
            'fc_b': np.zeros(num_classes),
        }
        return ModelParams(tensors, kind=CLASSIFIER_KIND,
                           meta={'input_size': input_size, 'num_classes': num_classes})

    @property
    def feature_size(self) -> int:
        return conv_output_size(conv_output_size(self.input_size))

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim == 2:
            batch = batch[None]
        if batch.ndim != 3 or batch.shape[1:] != (self.input_size, self.input_size):
            raise InvalidArgumentError(
                f"classifier expects inputs of {self.input_size}x{self.input_size}, got {batch.shape}")
        return batch

    def forward(self, batch: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Returns logits (N, C) and last-layer feature maps (N, 16, u, v); caches for backward."""
        x = self._check_batch(batch)[:, None]
        p = self.params
        z1, conv1_cache = conv_forward(x, p['conv1_w'], p['conv1_b'])
        a1, relu1_cache = relu_forward(z1)
        z2, conv2_cache = conv_forward(a1, p['conv2_w'], p['conv2_b'])
        features, relu2_cache = relu_forward(z2)
        pooled = features.mean(axis=(2, 3))
        logits = pooled @ p['fc_w'] + p['fc_b']
        self._cache = (conv1_cache, relu1_cache, conv2_cache, relu2_cache, features, pooled)
        return logits, features

    def _require_cache(self):
        if self._cache is None:
            raise PreconditionError("backward called before forward")
        return self._cache

    def loss(self, logits: np.ndarray, labels: np.ndarray, l1_coeff: float = 0.0) -> float:
        probs = softmax(logits)
        picked = probs[np.arange(len(labels)), labels]
        data_loss = float(-np.mean(np.log(np.maximum(picked, PROB_CLAMP))))
        return data_loss + l1_penalty(self.params, CLASSIFIER_WEIGHTS, l1_coeff)

    def backward(self, labels: np.ndarray, l1_coeff: float = 0.0) -> Dict[str, np.ndarray]:
        """Gradients of mean cross entropy + l1_coeff * sum|w| for the cached forward batch."""
        conv1_cache, relu1_cache, conv2_cache, relu2_cache, features, pooled = self._require_cache()
        p = self.params
        labels = np.asarray(labels, dtype=np.int64)
        n = features.shape[0]
        if labels.shape != (n,):
            raise InvalidArgumentError(f"expected {n} labels, got shape {labels.shape}")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise InvalidArgumentError("label out of range")
        logits = pooled @ p['fc_w'] + p['fc_b']
        dlogits = softmax(logits)
        dlogits[np.arange(n), labels] -= 1.0
        dlogits /= n

        grads = {'fc_w': pooled.T @ dlogits, 'fc_b': dlogits.sum(axis=0)}
        dpooled = dlogits @ p['fc_w'].T
        u, v = features.shape[2], features.shape[3]
        dfeatures = np.broadcast_to(dpooled[:, :, None, None] / (u * v), features.shape)
        dz2 = relu_backward(dfeatures, relu2_cache)
        da1, grads['conv2_w'], grads['conv2_b'] = conv_backward(dz2, conv2_cache)
        dz1 = relu_backward(da1, relu1_cache)
        _, grads['conv1_w'], grads['conv1_b'] = conv_backward(dz1, conv1_cache)
        add_l1_gradient(grads, p, CLASSIFIER_WEIGHTS, l1_coeff)
        return {name: grads[name] for name in p.names()}

    def score_gradient(self, class_id: int) -> np.ndarray:
        """d y_c / d f_i^k for the cached batch, shape (N, 16, u, v)."""
        features = self._require_cache()[4]
        if not 0 <= class_id < self.num_classes:
            raise InvalidArgumentError(f"class index {class_id} out of range [0, {self.num_classes})")
        u, v = features.shape[2], features.shape[3]
        column = self.params['fc_w'][:, class_id] / (u * v)
        return np.broadcast_to(column[None, :, None, None], features.shape).copy()


def _patch_array(patch: Union[Patch, np.ndarray]) -> np.ndarray:
    return patch.pixels if isinstance(patch, Patch) else np.asarray(patch)


def classifier_forward(patch: Union[Patch, np.ndarray], params: ModelParams) -> Tuple[Logits, FeatureMaps]:
    model = PatchClassifier(params)
    logits, features = model.forward(_patch_array(patch))
    return Logits(logits[0]), FeatureMaps(features[0])


def classifier_backward(model: PatchClassifier, truth: int,
                        l1_coeff: float = 0.0) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Parameter gradients for the cached single input and d y_truth / d f_i^k."""
    grads = model.backward(np.array([truth]), l1_coeff)
    return grads, model.score_gradient(truth)[0]


def seg_loss(pred: SegPrediction, truth: LabelMask, weights: ClassWeights) -> float:
    """-sum_s sum_j lambda_s 1(y_j = s) log p_j[s], probabilities clamped at 1e-12."""
    if pred.shape != truth.shape:
        raise InvalidArgumentError(f"prediction {pred.shape} and truth {truth.shape} dimensions differ")
    return _weighted_nll(pred.probs.reshape(-1, NUM_LABELS), truth.labels.ravel(), weights.lambda_s)


def _weighted_nll(probs: np.ndarray, labels: np.ndarray, lambda_s: np.ndarray) -> float:
    picked = probs[np.arange(labels.size), labels]
    return float(-np.sum(lambda_s[labels] * np.log(np.maximum(picked, PROB_CLAMP))))


def segmenter_features(img: RasterImage) -> np.ndarray:
    """(m * n, 17) features: intensity, local means and STD, soft gray-level bands, normalized coordinates.

    Bands are Gaussian bumps of the 3x3 mean centered on evenly spaced gray levels.
    """
    intensity = img.pixels.astype(np.float64) / MAX_GRAY
    mean3 = ndimage.uniform_filter(intensity, size=3, mode='nearest')
    sq3 = ndimage.uniform_filter(intensity * intensity, size=3, mode='nearest')
    std3 = np.sqrt(np.maximum(sq3 - mean3 * mean3, 0.0))
    wide = ndimage.uniform_filter(intensity, size=CONTEXT_WINDOW, mode='nearest')
    centers = np.linspace(0.0, 1.0, NUM_BANDS)
    width = 0.5 / (NUM_BANDS - 1)
    bands = [np.exp(-0.5 * ((mean3 - center) / width) ** 2) for center in centers]
    m, n = intensity.shape
    rows = np.linspace(-1.0, 1.0, m)[:, None] * np.ones((1, n))
    cols = np.ones((m, 1)) * np.linspace(-1.0, 1.0, n)[None, :]
    stack = [intensity, mean3, std3, wide] + bands + [rows, rows * rows, cols, cols * cols, rows * cols]
    return np.stack([feature.ravel() for feature in stack], axis=1)


class PixelSegmenter:
    """Per-pixel softmax over labels {background, heart, left lung, right lung}."""

    def __init__(self, params: ModelParams):
        if params.kind != SEGMENTER_KIND:
            raise InvalidArgumentError(f"expected {SEGMENTER_KIND} parameters, got {params.kind!r}")
        self.params = params

    @staticmethod
    def init_params(seed: int = 0) -> ModelParams:
        rng = np.random.default_rng(seed)
        tensors = {
            'seg_w': rng.normal(0.0, 0.01, (len(SEGMENTER_FEATURES), NUM_LABELS)),
            'seg_b': np.zeros(NUM_LABELS),
        }
        return ModelParams(tensors, kind=SEGMENTER_KIND, meta={'features': list(SEGMENTER_FEATURES)})

    def logits(self, features: np.ndarray) -> np.ndarray:
        return features @ self.params['seg_w'] + self.params['seg_b']

    def loss_and_grads(self, features: np.ndarray, labels: np.ndarray, lambda_s: np.ndarray,
                       l1_coeff: float = 0.0) -> Tuple[float, Dict[str, np.ndarray]]:
        labels = np.asarray(labels, dtype=np.int64)
        probs = softmax(self.logits(features))
        loss = _weighted_nll(probs, labels, lambda_s) + l1_penalty(self.params, SEGMENTER_WEIGHTS, l1_coeff)
        dlogits = probs
        dlogits[np.arange(labels.size), labels] -= 1.0
        dlogits *= lambda_s[labels][:, None]
        grads = {'seg_w': features.T @ dlogits, 'seg_b': dlogits.sum(axis=0)}
        add_l1_gradient(grads, self.params, SEGMENTER_WEIGHTS, l1_coeff)
        return loss, grads

    def predict_proba(self, img: RasterImage) -> SegPrediction:
        probs = softmax(self.logits(segmenter_features(img)))
        return SegPrediction(probs.reshape(img.height, img.width, NUM_LABELS))

    def predict(self, img: RasterImage) -> LabelMask:
        scores = self.logits(segmenter_features(img))
        return LabelMask(np.argmax(scores, axis=1).reshape(img.shape))


def segmenter_predict(img: RasterImage, params: ModelParams) -> LabelMask:
    return PixelSegmenter(params).predict(img)


def inverse_frequency_weights(label_arrays) -> ClassWeights:
    """lambda_s proportional to 1 / pixel frequency of s, normalized to mean 1; absent classes get 0."""
    counts = np.zeros(NUM_LABELS, dtype=np.float64)
    for labels in label_arrays:
        counts += np.bincount(np.asarray(labels).ravel(), minlength=NUM_LABELS)[:NUM_LABELS]
    if counts.sum() == 0:
        raise InvalidArgumentError("cannot derive class weights from empty label arrays")
    weights = np.zeros(NUM_LABELS)
    present = counts > 0
    weights[present] = counts.sum() / counts[present]
    weights *= present.sum() / weights.sum()
    return ClassWeights(weights)
