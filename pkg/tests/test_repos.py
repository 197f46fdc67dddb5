import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from infrastructures import CheckpointRepo, ConfigRepo, DatasetRepo, ImageRepo, ReportRepo, digest_of
from models import LabelMask, PatchConfig, RunConfig, SaliencyMap
from shared import ConfigError, InvalidArgumentError, RepositoryError


class TestImageRepo:

    def test_8bit_pgm(self, tmp_path, rng):
        raw = rng.integers(0, 256, (17, 23)).astype(np.uint8)
        file_path = str(tmp_path / 'x.pgm')
        ImageRepo().write_pgm(file_path, raw)
        loaded = ImageRepo().read_raw(file_path)
        assert loaded.dtype == np.uint8
        assert_array_equal(loaded, raw)

    def test_16bit_pgm(self, tmp_path, rng):
        raw = rng.integers(0, 65536, (9, 11)).astype(np.uint16)
        file_path = str(tmp_path / 'x.pgm')
        ImageRepo().write_pgm(file_path, raw)
        loaded = ImageRepo().read_raw(file_path)
        assert loaded.dtype == np.uint16
        assert_array_equal(loaded, raw)

    def test_float_raster_rejected(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            ImageRepo().write_pgm(str(tmp_path / 'x.pgm'), np.zeros((4, 4)))

    def test_mask_png(self, tmp_path, two_lung_mask):
        file_path = str(tmp_path / 'mask.png')
        ImageRepo().write_mask(file_path, two_lung_mask)
        assert_array_equal(ImageRepo().read_mask(file_path).labels, two_lung_mask.labels)

    def test_mask_with_foreign_labels(self, tmp_path):
        file_path = str(tmp_path / 'mask.png')
        ImageRepo().write_png(file_path, np.full((3, 3), 9, dtype=np.uint8))
        with pytest.raises(RepositoryError):
            ImageRepo().read_mask(file_path)

    def test_saliency_png_and_sidecar(self, tmp_path):
        values = np.array([[0.0, 0.25], [0.5, 1.0]])
        file_path = str(tmp_path / 'cam.png')
        ImageRepo().write_saliency(file_path, SaliencyMap(values))
        assert_array_equal(ImageRepo().read_raw(file_path), [[0, 64], [128, 255]])
        assert_array_equal(ImageRepo().read_sidecar(str(tmp_path / 'cam')), values)

    def test_missing_image(self, tmp_path):
        with pytest.raises(RepositoryError):
            ImageRepo().read_raw(str(tmp_path / 'none.pgm'))


class TestCheckpointRepo:

    def test_round_trip(self, tmp_path, tiny_classifier):
        base_path = str(tmp_path / 'classifier')
        CheckpointRepo().save(base_path, tiny_classifier)
        loaded = CheckpointRepo().load(base_path + '.json')
        assert loaded.names() == tiny_classifier.names()
        assert loaded.kind == tiny_classifier.kind
        assert loaded.meta == tiny_classifier.meta
        for name, value in tiny_classifier.items():
            assert_array_equal(loaded[name], value)

    def test_truncated_blob(self, tmp_path, tiny_classifier):
        base_path = str(tmp_path / 'classifier')
        CheckpointRepo().save(base_path, tiny_classifier)
        with open(base_path + '.bin', 'r+b') as file_writer:
            file_writer.truncate(64)
        with pytest.raises(RepositoryError):
            CheckpointRepo().load(base_path)

    def test_missing(self, tmp_path):
        with pytest.raises(RepositoryError):
            CheckpointRepo().load(str(tmp_path / 'nothing'))


class TestConfigRepo:

    def test_missing_default_gives_defaults(self, tmp_path):
        cfg = ConfigRepo(default_path=str(tmp_path / 'absent.json')).load()
        assert cfg == RunConfig()

    def test_missing_explicit_path(self, tmp_path):
        with pytest.raises(ConfigError):
            ConfigRepo(default_path=str(tmp_path / 'default.json')).load(str(tmp_path / 'other.json'))

    def test_unknown_key(self, tmp_path):
        file_path = tmp_path / 'cfg.json'
        file_path.write_text(json.dumps({'patches': {'K': 5, 'stride': 2}}))
        with pytest.raises(ConfigError):
            ConfigRepo().load(str(file_path))

    def test_wrong_type(self, tmp_path):
        file_path = tmp_path / 'cfg.json'
        file_path.write_text(json.dumps({'patches': {'K': 'many'}}))
        with pytest.raises(ConfigError):
            ConfigRepo().load(str(file_path))

    def test_invalid_value(self, tmp_path):
        file_path = tmp_path / 'cfg.json'
        file_path.write_text(json.dumps({'preprocess': {'gamma': 0.0}}))
        with pytest.raises(ConfigError):
            ConfigRepo().load(str(file_path))

    def test_not_json(self, tmp_path):
        file_path = tmp_path / 'cfg.json'
        file_path.write_text('{patches')
        with pytest.raises(ConfigError):
            ConfigRepo().load(str(file_path))

    def test_partial_block_keeps_other_defaults(self, tmp_path):
        file_path = tmp_path / 'cfg.json'
        file_path.write_text(json.dumps({'patches': {'K': 7}}))
        cfg = ConfigRepo().load(str(file_path))
        assert cfg.patches.K == 7
        assert cfg.patches.p == PatchConfig().p
        assert cfg.preprocess == RunConfig().preprocess

    def test_saved_config_loads_back(self, tmp_path):
        cfg = RunConfig.from_dict({'seed': 11, 'patches': {'K': 3, 'p': 32, 'q': 32}})
        file_path = ConfigRepo().save(str(tmp_path / 'cfg.json'), cfg)
        loaded = ConfigRepo().load(file_path)
        assert loaded.seed == 11
        assert (loaded.patches.K, loaded.patches.p) == (3, 32)


class TestReports:

    def test_digest_ignores_key_order(self):
        assert digest_of({'a': 1, 'b': [1, 2]}) == digest_of({'b': [1, 2], 'a': 1})
        assert digest_of({'a': 1}) != digest_of({'a': 2})

    def test_json_report(self, tmp_path):
        repo = ReportRepo(str(tmp_path / 'runs' / 'one'))
        file_path = repo.save_json('report.json', {'k': 3})
        assert ReportRepo.load_json(file_path) == {'k': 3}

    def test_missing_report(self, tmp_path):
        with pytest.raises(RepositoryError):
            ReportRepo.load_json(str(tmp_path / 'none.json'))


class TestDatasetRepo:

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(RepositoryError):
            DatasetRepo.load_manifest(str(tmp_path / 'manifest.json'))

    def test_manifest_without_items(self, tmp_path):
        file_path = tmp_path / 'manifest.json'
        file_path.write_text(json.dumps({'seed': 0}))
        with pytest.raises(RepositoryError):
            DatasetRepo.load_manifest(str(file_path))

    def test_items_load_back(self, tmp_path, small_phantom):
        repo = DatasetRepo(str(tmp_path / 'set'))
        phantom = small_phantom('tb', seed=1)
        entry = repo.save_phantom(0, phantom, 'val')
        repo.save_manifest([entry], seed=0, spec_digest='x')
        manifest = DatasetRepo.load_manifest(repo.manifest_path)
        items = repo.load_items(manifest, 'val')
        assert len(items) == 1
        assert items[0].class_id == 2
        assert_array_equal(items[0].raw, phantom.raw)
        assert repo.load_items(manifest, 'train') == []

    def test_mask_shape_mismatch(self, tmp_path, small_phantom):
        repo = DatasetRepo(str(tmp_path / 'set'))
        entry = repo.save_phantom(0, small_phantom('normal'), 'test')
        repo.image_repo.write_mask(str(tmp_path / 'set' / entry['mask_path']),
                                   LabelMask(np.zeros((8, 8), dtype=np.uint8)))
        with pytest.raises(RepositoryError):
            repo.load_items({'items': [entry]})
