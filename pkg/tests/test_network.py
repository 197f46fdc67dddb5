import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from models import ClassWeights, LabelMask, RasterImage, SegPrediction
from pipeline import (PatchClassifier,
                      PixelSegmenter,
                      classifier_backward,
                      classifier_forward,
                      inverse_frequency_weights,
                      seg_loss,
                      segmenter_predict,
                      softmax)
from pipeline.network import NUM_BANDS, SEGMENTER_FEATURES, segmenter_features
from shared import InvalidArgumentError, PreconditionError


def perturbed(params, name, index, delta):
    clone = params.copy()
    value = clone[name].copy()
    value[index] += delta
    clone.update(name, value)
    return clone


def classifier_loss(params, inputs, labels, l1_coeff):
    model = PatchClassifier(params)
    logits, _ = model.forward(inputs)
    return model.loss(logits, labels, l1_coeff)


class TestSoftmax:

    def test_equal_logits(self):
        assert_allclose(softmax(np.zeros(4)), 0.25)

    def test_large_logits_stay_finite(self):
        probs = softmax(np.array([1000.0, 0.0]))
        assert_allclose(probs, [1.0, 0.0])
        assert np.all(np.isfinite(probs))

    def test_shift_invariance(self, rng):
        logits = rng.normal(size=(5, 4))
        assert_allclose(softmax(logits), softmax(logits + 37.0), atol=1e-12)


class TestPatchClassifier:

    def test_feature_shapes(self, tiny_classifier, rng):
        logits, features = PatchClassifier(tiny_classifier).forward(rng.uniform(size=(3, 16, 16)))
        assert logits.shape == (3, 4)
        assert features.shape == (3, 16, 3, 3)
        assert np.all(features >= 0.0)

    def test_default_resolution_feature_grid(self):
        """56 -> 27 -> 13."""
        model = PatchClassifier(PatchClassifier.init_params(0))
        assert model.feature_size == 13

    def test_zero_weights_give_bias_logits(self, tiny_classifier):
        params = tiny_classifier.copy()
        for name in params.names():
            params.update(name, np.zeros_like(params[name]))
        params.update('fc_b', np.array([0.5, -1.0, 2.0, 0.0]))
        logits, features = classifier_forward(np.full((16, 16), 0.3), params)
        assert_allclose(logits.scores, [0.5, -1.0, 2.0, 0.0])
        assert_array_equal(features.channels, 0.0)

    def test_deterministic(self, tiny_classifier, rng):
        inputs = rng.uniform(size=(2, 16, 16))
        first, _ = PatchClassifier(tiny_classifier).forward(inputs)
        second, _ = PatchClassifier(tiny_classifier).forward(inputs)
        assert_array_equal(first, second)

    def test_wrong_input_size(self, tiny_classifier):
        with pytest.raises(InvalidArgumentError):
            PatchClassifier(tiny_classifier).forward(np.zeros((1, 15, 15)))

    def test_backward_needs_forward(self, tiny_classifier):
        with pytest.raises(PreconditionError):
            PatchClassifier(tiny_classifier).backward(np.array([0]))

    def test_rejects_segmenter_params(self):
        with pytest.raises(InvalidArgumentError):
            PatchClassifier(PixelSegmenter.init_params(0))

    def test_gradients_match_finite_differences(self, tiny_classifier, rng):
        inputs = rng.uniform(size=(2, 16, 16))
        labels = np.array([1, 3])
        l1_coeff = 0.01
        model = PatchClassifier(tiny_classifier)
        model.forward(inputs)
        grads = model.backward(labels, l1_coeff)
        step = 1e-6
        for name in tiny_classifier.names():
            shape = tiny_classifier[name].shape
            for flat in rng.choice(int(np.prod(shape)), size=min(6, int(np.prod(shape))), replace=False):
                index = np.unravel_index(flat, shape)
                plus = classifier_loss(perturbed(tiny_classifier, name, index, step), inputs, labels, l1_coeff)
                minus = classifier_loss(perturbed(tiny_classifier, name, index, -step), inputs, labels, l1_coeff)
                numeric = (plus - minus) / (2.0 * step)
                assert_allclose(grads[name][index], numeric, rtol=1e-4, atol=1e-7, err_msg=f"{name}{index}")

    def test_l1_adds_sign_of_weights(self, tiny_classifier, rng):
        inputs = rng.uniform(size=(2, 16, 16))
        model = PatchClassifier(tiny_classifier)
        model.forward(inputs)
        plain = model.backward(np.array([0, 2]), 0.0)
        penalized = model.backward(np.array([0, 2]), 0.1)
        for name in ('conv1_w', 'conv2_w', 'fc_w'):
            assert_allclose(penalized[name] - plain[name], 0.1 * np.sign(tiny_classifier[name]), atol=1e-12)
        assert_allclose(penalized['fc_b'], plain['fc_b'])

    def test_confident_correct_prediction_has_no_bias_gradient(self, tiny_classifier):
        params = tiny_classifier.copy()
        for name in params.names():
            params.update(name, np.zeros_like(params[name]))
        params.update('fc_b', np.array([1000.0, 0.0, 0.0, 0.0]))
        model = PatchClassifier(params)
        model.forward(np.zeros((1, 16, 16)))
        assert_array_equal(model.backward(np.array([0]))['fc_b'], 0.0)

    def test_score_gradient_reconstructs_logit(self, tiny_classifier, rng):
        """y_c is linear in the feature maps, so sum(grad * f) + b_c gives y_c back."""
        model = PatchClassifier(tiny_classifier)
        logits, features = model.forward(rng.uniform(size=(1, 16, 16)))
        grads, score_gradient = classifier_backward(model, 2)
        assert score_gradient.shape == (16, 3, 3)
        assert set(grads) == set(tiny_classifier.names())
        rebuilt = float(np.sum(score_gradient * features[0])) + tiny_classifier['fc_b'][2]
        assert rebuilt == pytest.approx(logits[0, 2], abs=1e-12)


class TestSegLoss:

    def _prediction(self, probs):
        return SegPrediction(np.asarray(probs, dtype=float))

    def test_correct_one_hot_is_zero(self):
        labels = np.array([[0, 1, 2], [3, 2, 1]])
        probs = np.eye(4)[labels]
        assert seg_loss(self._prediction(probs), LabelMask(labels), ClassWeights.uniform()) == 0.0

    def test_uniform_prediction(self):
        """Six pixels at probability 1/4 each: 6 ln 4."""
        labels = np.array([[0, 1, 2], [3, 2, 1]])
        probs = np.full((2, 3, 4), 0.25)
        loss = seg_loss(self._prediction(probs), LabelMask(labels), ClassWeights.uniform())
        assert loss == pytest.approx(6 * np.log(4.0))

    def test_doubling_weights_doubles_loss(self, rng):
        labels = rng.integers(0, 4, (3, 3))
        probs = softmax(rng.normal(size=(3, 3, 4)))
        weights = np.array([0.5, 1.0, 2.0, 0.5])
        single = seg_loss(self._prediction(probs), LabelMask(labels), ClassWeights(weights))
        double = seg_loss(self._prediction(probs), LabelMask(labels), ClassWeights(2 * weights))
        assert double == pytest.approx(2 * single)

    def test_zero_probability_is_clamped(self):
        labels = np.array([[1]])
        probs = np.array([[[1.0, 0.0, 0.0, 0.0]]])
        loss = seg_loss(self._prediction(probs), LabelMask(labels), ClassWeights.uniform())
        assert loss == pytest.approx(-np.log(1e-12))


class TestPixelSegmenter:

    def test_gradients_match_finite_differences(self, rng):
        params = PixelSegmenter.init_params(3)
        params.update('seg_w', rng.normal(size=params['seg_w'].shape))
        features = rng.normal(size=(20, len(SEGMENTER_FEATURES)))
        labels = rng.integers(0, 4, 20)
        lambda_s = np.array([0.5, 1.0, 2.0, 0.5])
        _, grads = PixelSegmenter(params).loss_and_grads(features, labels, lambda_s, 0.01)
        step = 1e-6
        for name in params.names():
            for index in np.ndindex(params[name].shape):
                plus, _ = PixelSegmenter(perturbed(params, name, index, step)).loss_and_grads(
                    features, labels, lambda_s, 0.01)
                minus, _ = PixelSegmenter(perturbed(params, name, index, -step)).loss_and_grads(
                    features, labels, lambda_s, 0.01)
                assert_allclose(grads[name][index], (plus - minus) / (2.0 * step), rtol=1e-5, atol=1e-6)

    def test_features_shape(self, rng):
        features = segmenter_features(RasterImage(rng.uniform(0, 255, (5, 7))))
        assert features.shape == (35, len(SEGMENTER_FEATURES))

    def test_bands_peak_at_their_gray_level(self):
        """A white image sits on the last band center (weight 1) and 14 widths from the first."""
        features = segmenter_features(RasterImage(np.full((4, 4), 255.0)))
        first = SEGMENTER_FEATURES.index('band0')
        bands = features[:, first:first + NUM_BANDS]
        assert_allclose(bands[:, -1], 1.0)
        assert np.all(bands[:, 0] < 1e-6)

    def test_coordinates_span_unit_square(self):
        features = segmenter_features(RasterImage(np.zeros((3, 5))))
        cols = features[:, SEGMENTER_FEATURES.index('col')].reshape(3, 5)
        rows = features[:, SEGMENTER_FEATURES.index('row')].reshape(3, 5)
        assert_allclose(cols[0], [-1.0, -0.5, 0.0, 0.5, 1.0])
        assert_allclose(rows[:, 0], [-1.0, 0.0, 1.0])

    def test_predict_shapes(self, rng):
        img = RasterImage(rng.uniform(0, 255, (6, 8)))
        params = PixelSegmenter.init_params(0)
        mask = segmenter_predict(img, params)
        assert mask.shape == (6, 8)
        probs = PixelSegmenter(params).predict_proba(img)
        assert_allclose(probs.probs.sum(axis=2), 1.0)
        assert_array_equal(np.argmax(probs.probs, axis=2), mask.labels)


class TestInverseFrequencyWeights:

    def test_ratios_and_mean(self):
        """Counts 6/2/1/1 give raw weights 10/6, 5, 10, 10, rescaled to mean 1."""
        labels = np.array([0, 0, 0, 0, 0, 0, 1, 1, 2, 3])
        weights = inverse_frequency_weights([labels]).lambda_s
        assert weights.mean() == pytest.approx(1.0)
        assert weights[1] / weights[0] == pytest.approx(3.0)
        assert weights[2] == pytest.approx(weights[3])

    def test_absent_class_gets_zero(self):
        weights = inverse_frequency_weights([np.array([0, 0, 2, 2, 2])]).lambda_s
        assert weights[1] == 0.0
        assert weights[3] == 0.0
        assert weights.sum() == pytest.approx(2.0)
