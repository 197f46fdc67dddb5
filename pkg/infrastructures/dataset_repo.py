import json
import os
from typing import Dict, List, Optional

from models import LabeledImage, Phantom
from shared import FILE_PATH_ROOT, RepositoryError
from shared.constants import CLASS_NAMES
from .image_repo import ImageRepo

MANIFEST_NAME = 'manifest.json'
SPLITS = ('train', 'val', 'test')


class DatasetRepo:
    """Phantom dataset on disk: images/, masks/ and manifest.json under one root."""

    def __init__(self, root: str = FILE_PATH_ROOT + 'phantoms', image_repo: Optional[ImageRepo] = None):
        self.root = root
        self.image_repo = image_repo or ImageRepo()

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.root, MANIFEST_NAME)

    def _ensure_dirs(self) -> None:
        # the parent of root must exist already
        try:
            for path in (self.root, os.path.join(self.root, 'images'), os.path.join(self.root, 'masks')):
                if not os.path.isdir(path):
                    os.mkdir(path)
        except OSError as error:
            raise RepositoryError(f"cannot create dataset directory under {self.root}: {error}")

    def save_phantom(self, index: int, phantom: Phantom, split: str) -> Dict:
        self._ensure_dirs()
        name = f"{phantom.label}_{index:05d}"
        image_path = os.path.join('images', name + '.pgm')
        mask_path = os.path.join('masks', name + '.png')
        self.image_repo.write_pgm(os.path.join(self.root, image_path), phantom.raw)
        self.image_repo.write_mask(os.path.join(self.root, mask_path), phantom.mask)
        return self._phantom_to_dict(phantom, image_path, mask_path, split)

    def save_manifest(self, entries: List[Dict], seed: int, spec_digest: str) -> str:
        self._ensure_dirs()
        manifest = {'items': entries, 'seed': seed, 'spec_digest': spec_digest}
        try:
            with open(self.manifest_path, 'w') as file_writer:
                json.dump(manifest, file_writer, indent=2, sort_keys=True)
        except OSError as error:
            raise RepositoryError(f"cannot write manifest {self.manifest_path}: {error}")
        return self.manifest_path

    @staticmethod
    def load_manifest(manifest_path: str) -> Dict:
        try:
            with open(manifest_path, 'r') as file_reader:
                manifest = json.load(file_reader)
        except FileNotFoundError:
            raise RepositoryError(f"manifest not found: {manifest_path}")
        except (OSError, json.JSONDecodeError) as error:
            raise RepositoryError(f"cannot read manifest {manifest_path}: {error}")
        if not isinstance(manifest, dict) or not isinstance(manifest.get('items'), list):
            raise RepositoryError(f"manifest {manifest_path} has no item list")
        for item in manifest['items']:
            missing = {'image_path', 'mask_path', 'label', 'split'} - set(item)
            if missing:
                raise RepositoryError(f"manifest item lacks {sorted(missing)}")
        return manifest

    @classmethod
    def from_manifest(cls, manifest_path: str) -> 'DatasetRepo':
        return cls(os.path.dirname(os.path.abspath(manifest_path)))

    def load_items(self, manifest: Dict, split: Optional[str] = None) -> List[LabeledImage]:
        """Every manifest item of the split (all items when split is None or 'all'), in manifest order."""
        return [self._dict_to_item(item) for item in manifest['items']
                if split in (None, 'all') or item['split'] == split]

    def _dict_to_item(self, item: Dict) -> LabeledImage:
        if item['label'] not in CLASS_NAMES:
            raise RepositoryError(f"unknown class label {item['label']!r} in manifest")
        raw = self.image_repo.read_raw(os.path.join(self.root, item['image_path']))
        mask = self.image_repo.read_mask(os.path.join(self.root, item['mask_path']))
        if raw.shape != mask.shape:
            raise RepositoryError(f"{item['image_path']} and {item['mask_path']} differ in dimensions")
        return LabeledImage(raw, mask, CLASS_NAMES.index(item['label']), item['split'],
                            os.path.splitext(os.path.basename(item['image_path']))[0])

    def _phantom_to_dict(self, phantom: Phantom, image_path: str, mask_path: str, split: str) -> Dict:
        return {'image_path': image_path,
                'mask_path': mask_path,
                'label': phantom.label,
                'split': split,
                'seed': phantom.spec.seed,
                'analytic_ctr': phantom.analytic_ctr,
                'n_lesions': phantom.n_lesions,
                'lesion_straddles': phantom.lesion_straddles}
