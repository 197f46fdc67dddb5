import numpy as np
import pytest

from models import LabelMask, PatchPlacement, PhantomSpec, RasterImage
from pipeline import coverage, extract_patches, gen_phantom, place_patch, sample_centers
from shared import InvalidArgumentError, NoLungError


class TestPlacePatch:

    @pytest.mark.parametrize('center, top, left', [((0, 0), 0, 0), ((9, 9), 6, 6), ((5, 5), 3, 3),
                                                   ((2, 8), 0, 6)])
    def test_clamps_into_image(self, center, top, left):
        placement = place_patch(center, 4, 4, 10, 10)
        assert (placement.top, placement.left) == (top, left)
        assert placement.fits(10, 10)

    def test_patch_larger_than_image(self):
        with pytest.raises(InvalidArgumentError):
            place_patch((0, 0), 11, 4, 10, 10)


class TestSampleCenters:

    def test_centers_lie_in_lung(self, two_lung_mask):
        for row, col in sample_centers(two_lung_mask, 200, seed=3):
            assert two_lung_mask.labels[row, col] in (2, 3)

    def test_same_seed_same_centers(self, two_lung_mask):
        assert sample_centers(two_lung_mask, 20, 5) == sample_centers(two_lung_mask, 20, 5)

    def test_no_lung(self):
        with pytest.raises(NoLungError):
            sample_centers(LabelMask(np.ones((6, 6), dtype=np.uint8)), 3, 0)

    def test_non_positive_K(self, two_lung_mask):
        with pytest.raises(InvalidArgumentError):
            sample_centers(two_lung_mask, 0, 0)


class TestExtractPatches:

    def test_patches_align_with_placements(self, two_lung_mask, rng):
        img = RasterImage(rng.uniform(0, 255, (12, 12)))
        patches, placements = extract_patches(img, two_lung_mask, 5, 4, 6, seed=1)
        assert len(patches) == len(placements) == 5
        for patch, placement in zip(patches, placements):
            assert patch.pixels.shape == (4, 6)
            np.testing.assert_array_equal(patch.pixels, img.pixels[placement.window()])

    def test_duplicate_centers_allowed(self):
        """A single lung pixel forces K identical placements."""
        labels = np.zeros((8, 8), dtype=np.uint8)
        labels[4, 4] = 2
        _, placements = extract_patches(RasterImage(np.zeros((8, 8))), LabelMask(labels), 3, 2, 2, seed=0)
        assert placements == [PatchPlacement(3, 3, 2, 2)] * 3


class TestCoverage:

    def test_total_count_is_K_times_patch_area(self, rng):
        for _ in range(100):
            m, n = int(rng.integers(8, 40)), int(rng.integers(8, 40))
            p, q = int(rng.integers(1, m + 1)), int(rng.integers(1, n + 1))
            K = int(rng.integers(1, 30))
            placements = [place_patch((int(rng.integers(0, m)), int(rng.integers(0, n))), p, q, m, n)
                          for _ in range(K)]
            counts = coverage(placements, m, n)
            assert counts.counts.sum() == K * p * q
            assert counts.counts.max() <= K

    def test_placement_outside_rejected(self):
        with pytest.raises(InvalidArgumentError):
            coverage([PatchPlacement(5, 5, 4, 4)], 8, 8)

    @pytest.mark.slow
    def test_default_ensemble_covers_phantom_lungs(self):
        """K = 100 patches of 224 x 224 cover at least 99% of the lung in a 1024 px phantom."""
        phantom = gen_phantom(PhantomSpec(label='normal', size=1024, seed=11))
        _, placements = extract_patches(RasterImage(phantom.raw), phantom.mask, 100, 224, 224, seed=11)
        counts = coverage(placements, 1024, 1024).counts
        lung = phantom.mask.lung
        assert np.count_nonzero(counts[lung]) / np.count_nonzero(lung) >= 0.99
