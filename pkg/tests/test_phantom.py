import json
import os

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from models import LesionParams, PhantomSpec
from pipeline import ctr, gen_dataset, gen_phantom, plan_dataset
from pipeline.phantom import item_seeds, specs_digest, split_counts
from shared import InvalidArgumentError, RepositoryError, set_threads
from shared.constants import CLASS_NAMES


def quiet(label: str, seed: int = 0, size: int = 128, **overrides):
    """Noise-free phantom without rib texture."""
    return gen_phantom(PhantomSpec(label=label, size=size, seed=seed, noise_sigma=0.0, rib_amplitude=0.0,
                                   **overrides))


class TestAnatomy:

    def test_lung_intensity_exact_without_noise(self):
        phantom = quiet('normal')
        assert_array_equal(phantom.raw[phantom.mask.lung], 75)

    def test_all_labels_present(self):
        phantom = quiet('normal')
        assert set(np.unique(phantom.mask.labels)) == {0, 1, 2, 3}
        assert phantom.raw.dtype == np.uint8

    def test_left_lung_is_on_image_right(self):
        phantom = quiet('normal')
        cols = np.nonzero(phantom.mask.labels == 2)[1]
        assert cols.min() > 64

    def test_ctr_matches_geometry(self):
        phantom = gen_phantom(PhantomSpec(label='normal', size=256, seed=1))
        assert ctr(phantom.mask) == pytest.approx(phantom.analytic_ctr, abs=0.02)

    @pytest.mark.parametrize('ratio', [0.35, 0.55])
    def test_ctr_follows_ratio(self, ratio):
        phantom = gen_phantom(PhantomSpec(label='normal', size=256, ctr_ratio=ratio))
        assert ctr(phantom.mask) == pytest.approx(ratio, abs=0.02)

    @pytest.mark.parametrize('lung_semi_cols, expected', [(0.15, 0.45), (0.18, 0.324 / 0.78)])
    def test_ctr_tracks_lung_width_under_fixed_heart(self, lung_semi_cols, expected):
        """Heart span 2 * 0.162 over lung span 2 * (0.21 + lung_semi_cols)."""
        spec = PhantomSpec(label='normal', size=256, heart_semi_cols=0.162, lung_semi_cols=lung_semi_cols)
        assert spec.analytic_ctr == pytest.approx(expected)
        assert ctr(gen_phantom(spec).mask) == pytest.approx(expected, abs=0.02)

    def test_spans_are_image_fractions(self):
        spec = PhantomSpec(heart_semi_cols=0.1)
        assert spec.cardiac_span == pytest.approx(0.2)
        assert spec.thoracic_span == pytest.approx(0.72)

    def test_non_positive_heart_width(self):
        with pytest.raises(InvalidArgumentError):
            PhantomSpec(heart_semi_cols=0.0)

    def test_same_spec_same_bytes(self):
        spec = PhantomSpec(label='viral_covid', size=96, seed=42)
        first, second = gen_phantom(spec), gen_phantom(spec)
        assert first.raw.tobytes() == second.raw.tobytes()
        assert first.mask.labels.tobytes() == second.mask.labels.tobytes()

    def test_lungs_overflowing_image(self):
        with pytest.raises(InvalidArgumentError):
            gen_phantom(PhantomSpec(size=64, lung_semi_rows=0.6))


class TestLesions:

    def test_normal_has_none(self):
        assert quiet('normal').n_lesions == 0

    @pytest.mark.parametrize('label', ['tb', 'viral_covid'])
    def test_lesions_stay_inside_lung(self, label):
        for seed in range(5):
            lesioned = quiet(label, seed=seed)
            baseline = quiet('normal', seed=seed)
            changed = lesioned.raw != baseline.raw
            assert changed.any()
            assert not np.any(changed & ~lesioned.mask.lung)

    def test_tb_nodules_in_upper_lung(self):
        lesioned, baseline = quiet('tb', seed=3), quiet('normal', seed=3)
        rows = np.nonzero(lesioned.raw != baseline.raw)[0]
        lung_rows = np.nonzero(lesioned.mask.lung.any(axis=1))[0]
        assert rows.max() < lung_rows.min() + 0.5 * (lung_rows.max() - lung_rows.min())

    def test_tb_count_in_range(self):
        """2-5 nodules per lung."""
        for seed in range(10):
            assert 4 <= quiet('tb', seed=seed).n_lesions <= 10

    def test_tb_nodules_in_both_lungs(self):
        lesioned, baseline = quiet('tb', seed=2), quiet('normal', seed=2)
        changed = lesioned.raw != baseline.raw
        assert np.any(changed & (lesioned.mask.labels == 2))
        assert np.any(changed & (lesioned.mask.labels == 3))

    def test_viral_darkens_lungs(self):
        lesioned, baseline = quiet('viral_covid', seed=1), quiet('normal', seed=1)
        lung = lesioned.mask.lung
        assert lesioned.raw[lung].mean() < baseline.raw[lung].mean()

    def test_bacterial_straddles_lung_border(self):
        for seed in range(5):
            lesioned, baseline = quiet('bacterial', seed=seed), quiet('normal', seed=seed)
            changed = lesioned.raw != baseline.raw
            assert lesioned.lesion_straddles
            assert np.any(changed & ~lesioned.mask.lung)
            assert np.any(changed & lesioned.mask.lung)

    def test_bacterial_opacity_hides_a_quarter_of_the_lungs(self):
        """Semi-axes of at least 0.9 lung semi-axes, shifted by at most 0.36, cover about 2/3 of one lung."""
        for seed in range(10):
            lesioned, baseline = quiet('bacterial', seed=seed), quiet('normal', seed=seed)
            lung = lesioned.mask.lung
            covered = np.count_nonzero((lesioned.raw != baseline.raw) & lung)
            assert covered / np.count_nonzero(lung) > 0.25

    def test_bacterial_radius_scales_opacity(self):
        """Doubling both semi-axis scales quadruples the painted ellipse."""
        def painted(scale):
            params = LesionParams(count=(1, 1), radius=(scale, scale), contrast=(100.0, 100.0))
            lesioned = quiet('bacterial', seed=4, lesions=params)
            return np.count_nonzero(lesioned.raw != quiet('normal', seed=4).raw)
        assert 3.5 < painted(1.0) / painted(0.5) < 4.5

    def test_custom_lesion_params(self):
        phantom = quiet('tb', lesions=LesionParams(count=(7, 7), radius=(0.02, 0.02), contrast=(50.0, 50.0)))
        assert phantom.n_lesions == 14


class TestPlanning:

    @pytest.mark.parametrize('n, expected', [(10, (7, 1, 2)), (100, (70, 10, 20)), (15, (10, 2, 3))])
    def test_split_counts(self, n, expected):
        counts = split_counts(n)
        assert (counts['train'], counts['val'], counts['test']) == expected

    def test_plan_is_stratified_and_deterministic(self):
        specs = {label: PhantomSpec(label=label, size=64) for label in CLASS_NAMES}
        plan = plan_dataset(10, specs, seed=5)
        assert len(plan) == 40
        for label in CLASS_NAMES:
            splits = [split for spec, split in plan if spec.label == label]
            assert splits.count('train') == 7
            assert splits.count('val') == 1
            assert splits.count('test') == 2
        again = plan_dataset(10, specs, seed=5)
        assert [(spec.seed, split) for spec, split in plan] == [(spec.seed, split) for spec, split in again]

    def test_item_seeds_distinct(self):
        seeds = item_seeds(0, 200)
        assert len(set(seeds)) == 200
        assert seeds == item_seeds(0, 200)

    def test_too_few_per_class(self):
        with pytest.raises(InvalidArgumentError):
            plan_dataset(9, {'normal': PhantomSpec()}, seed=0)

    def test_digest_ignores_seed(self):
        first = specs_digest({'normal': PhantomSpec(seed=1)})
        second = specs_digest({'normal': PhantomSpec(seed=2)})
        assert first == second
        assert first != specs_digest({'normal': PhantomSpec(noise_sigma=1.0)})


class TestGenDataset:

    def _specs(self):
        return {label: PhantomSpec(label=label, size=48) for label in ('normal', 'tb')}

    def test_writes_manifest_and_files(self, tmp_path):
        root = tmp_path / 'phantoms'
        manifest_path = gen_dataset(10, self._specs(), seed=2, root=str(root))
        with open(manifest_path) as file_reader:
            manifest = json.load(file_reader)
        assert len(manifest['items']) == 20
        first = manifest['items'][0]
        assert os.path.exists(root / first['image_path'])
        assert os.path.exists(root / first['mask_path'])
        assert first['label'] == 'normal'

    def test_same_seed_same_manifest(self, tmp_path):
        first = gen_dataset(10, self._specs(), seed=2, root=str(tmp_path / 'a'))
        second = gen_dataset(10, self._specs(), seed=2, root=str(tmp_path / 'b'))
        with open(first, 'rb') as a, open(second, 'rb') as b:
            assert a.read() == b.read()

    def test_thread_count_does_not_change_files(self, tmp_path):
        first = gen_dataset(10, self._specs(), seed=2, root=str(tmp_path / 'one'))
        set_threads(4)
        second = gen_dataset(10, self._specs(), seed=2, root=str(tmp_path / 'four'))
        with open(first, 'rb') as a, open(second, 'rb') as b:
            assert a.read() == b.read()
        with open(first) as file_reader:
            items = json.load(file_reader)['items']
        for item in items:
            for key in ('image_path', 'mask_path'):
                assert (tmp_path / 'one' / item[key]).read_bytes() == (tmp_path / 'four' / item[key]).read_bytes()

    def test_missing_parent_directory(self, tmp_path):
        with pytest.raises(RepositoryError):
            gen_dataset(10, self._specs(), seed=2, root=str(tmp_path / 'missing' / 'phantoms'))
