import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from models import ChannelWeights, CoverageMap, FeatureMaps, Patch, PatchPlacement, PatchProbs, RasterImage, \
    SaliencyMap
from pipeline import coverage, global_grad_cam, grad_cam, grad_cams, overlay, prob_grad_cam, softmax
from pipeline.saliency import cam_from_features, channel_weights
from shared import InvalidArgumentError


def per_pixel_oracle(maps, probs, placements, class_id, m, n):
    """Mean of r * map over the placements covering each pixel, looping pixel by pixel."""
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            total, covering = 0.0, 0
            for patch_map, placement, row in zip(maps, placements, probs):
                if placement.top <= i < placement.bottom and placement.left <= j < placement.right:
                    total += row[class_id] * patch_map.values[i - placement.top, j - placement.left]
                    covering += 1
            out[i, j] = total / covering if covering else 0.0
    return out


class TestCamFromFeatures:

    def test_hand_computed_two_by_two(self):
        """ReLU(2F) = [[2, 0], [0, 6]]; bilinear to 3x3 then divide by the max 6."""
        features = FeatureMaps([[[1.0, 0.0], [0.0, 3.0]]])
        cam = cam_from_features(features, ChannelWeights([2.0], 4), 3, 3)
        expected = np.array([[2.0, 1.0, 0.0],
                             [1.0, 2.0, 3.0],
                             [0.0, 3.0, 6.0]]) / 6.0
        assert_allclose(cam.values, expected)

    def test_negative_evidence_gives_zero_map(self):
        features = FeatureMaps(np.ones((2, 3, 3)))
        cam = cam_from_features(features, ChannelWeights([-1.0, -0.5], 9), 6, 6)
        assert_array_equal(cam.values, 0.0)

    def test_channel_weights_average_gradient(self):
        gradient = np.stack([np.full((3, 3), 0.2), np.arange(9.0).reshape(3, 3)])
        weights = channel_weights(gradient)
        assert weights.Z == 9
        assert_allclose(weights.alpha, [0.2, 4.0])


class TestGradCam:

    def test_range_and_shape(self, tiny_classifier, rng):
        cam = grad_cam(Patch(rng.uniform(0, 255, (24, 20))), tiny_classifier, 3)
        assert cam.shape == (24, 20)
        assert cam.values.min() >= 0.0
        assert cam.values.max() <= 1.0

    def test_zero_class_weights_give_zero_map(self, tiny_classifier, rng):
        params = tiny_classifier.copy()
        fc_w = params['fc_w'].copy()
        fc_w[:, 1] = 0.0
        params.update('fc_w', fc_w)
        cam = grad_cam(Patch(rng.uniform(0, 255, (16, 16))), params, 1)
        assert_array_equal(cam.values, 0.0)

    def test_batch_matches_single(self, tiny_classifier, rng):
        patches = [Patch(rng.uniform(0, 255, (16, 16))) for _ in range(5)]
        maps = grad_cams(patches, tiny_classifier, 2, chunk_size=2)
        for patch, batch_map in zip(patches, maps):
            assert_allclose(batch_map.values, grad_cam(patch, tiny_classifier, 2).values, atol=1e-12)

    def test_invalid_class(self, tiny_classifier):
        with pytest.raises(InvalidArgumentError):
            grad_cam(Patch(np.zeros((16, 16))), tiny_classifier, 4)

    def test_global_map_covers_image(self, tiny_classifier, small_phantom):
        phantom = small_phantom('viral_covid', seed=3)
        cam = global_grad_cam(RasterImage(phantom.raw), phantom.mask, tiny_classifier, 3)
        assert cam.shape == (64, 64)
        assert cam.scope == 'image'


class TestProbGradCam:

    def _random_case(self, rng):
        m, n = int(rng.integers(12, 21)), int(rng.integers(12, 21))
        K = int(rng.integers(1, 11))
        placements = []
        for _ in range(K):
            p, q = int(rng.integers(2, 9)), int(rng.integers(2, 9))
            placements.append(PatchPlacement(int(rng.integers(0, m - p + 1)), int(rng.integers(0, n - q + 1)), p, q))
        maps = [SaliencyMap(rng.uniform(size=(pl.p, pl.q))) for pl in placements]
        probs = softmax(rng.normal(size=(K, 4)))
        return m, n, placements, maps, probs

    def test_matches_per_pixel_oracle(self, rng):
        for _ in range(50):
            m, n, placements, maps, probs = self._random_case(rng)
            result = prob_grad_cam(maps, PatchProbs(probs), placements, coverage(placements, m, n), 2)
            assert_allclose(result.values, per_pixel_oracle(maps, probs, placements, 2, m, n), atol=1e-12)

    def test_permutation_invariant(self, rng):
        m, n, placements, maps, probs = self._random_case(rng)
        order = rng.permutation(len(placements))
        first = prob_grad_cam(maps, PatchProbs(probs), placements, coverage(placements, m, n), 0)
        second = prob_grad_cam([maps[k] for k in order], PatchProbs(probs[order]),
                               [placements[k] for k in order], coverage(placements, m, n), 0)
        assert_allclose(first.values, second.values, atol=1e-12)

    def test_single_full_patch_with_certainty(self):
        placement = PatchPlacement(0, 0, 4, 5)
        patch_map = SaliencyMap(np.linspace(0.0, 1.0, 20).reshape(4, 5))
        result = prob_grad_cam([patch_map], PatchProbs([[0.0, 1.0]]), [placement], coverage([placement], 4, 5), 1)
        assert_allclose(result.values, patch_map.values)

    def test_overlap_averages_weighted_maps(self):
        """The same map at the same spot with r = 0.2 and 0.6 averages to 0.4 * map."""
        placement = PatchPlacement(1, 1, 2, 2)
        patch_map = SaliencyMap([[1.0, 0.5], [0.25, 0.0]])
        probs = PatchProbs([[0.8, 0.2], [0.4, 0.6]])
        result = prob_grad_cam([patch_map, patch_map], probs, [placement, placement],
                               coverage([placement, placement], 4, 4), 1)
        assert_allclose(result.values[1:3, 1:3], 0.4 * patch_map.values)
        assert result.values[0].sum() == 0.0

    def test_zero_probability_gives_zero_map(self):
        placement = PatchPlacement(0, 0, 3, 3)
        result = prob_grad_cam([SaliencyMap(np.ones((3, 3)))], PatchProbs([[1.0, 0.0]]), [placement],
                               coverage([placement], 5, 5), 1)
        assert_array_equal(result.values, 0.0)

    def test_misaligned_inputs(self):
        placement = PatchPlacement(0, 0, 2, 2)
        with pytest.raises(InvalidArgumentError):
            prob_grad_cam([SaliencyMap(np.ones((2, 2)))] * 2, PatchProbs([[1.0, 0.0]]), [placement],
                          coverage([placement], 4, 4), 0)

    def test_foreign_coverage_rejected(self):
        placement = PatchPlacement(0, 0, 2, 2)
        with pytest.raises(InvalidArgumentError):
            prob_grad_cam([SaliencyMap(np.ones((2, 2)))], PatchProbs([[1.0, 0.0]]), [placement],
                          CoverageMap(np.zeros((4, 4)), 1), 0)


class TestOverlay:

    def test_blend(self):
        img = RasterImage([[0.0, 200.0]])
        result = overlay(img, SaliencyMap([[1.0, 0.0]]))
        assert_allclose(result.pixels, [[127.5, 100.0]])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            overlay(RasterImage(np.zeros((2, 2))), SaliencyMap(np.zeros((2, 3))))
