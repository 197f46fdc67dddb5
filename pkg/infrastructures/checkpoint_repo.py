import json
from typing import Dict

import numpy as np

from models import ModelParams
from shared import InvalidArgumentError, RepositoryError

TENSOR_DTYPE = '<f8'


class CheckpointRepo:
    """<name>.bin holds every tensor as little-endian float64, in manifest order; <name>.json the layout."""

    def save(self, base_path: str, params: ModelParams) -> str:
        manifest = self._params_to_dict(params)
        blob = np.concatenate([value.ravel() for _, value in params.items()]).astype(TENSOR_DTYPE)
        try:
            blob.tofile(base_path + '.bin')
            with open(base_path + '.json', 'w') as file_writer:
                json.dump(manifest, file_writer, indent=2, sort_keys=True)
        except OSError as error:
            raise RepositoryError(f"cannot write checkpoint {base_path}: {error}")
        return base_path + '.json'

    def load(self, base_path: str) -> ModelParams:
        if base_path.endswith('.json') or base_path.endswith('.bin'):
            base_path = base_path.rsplit('.', 1)[0]
        try:
            with open(base_path + '.json', 'r') as file_reader:
                manifest = json.load(file_reader)
            blob = np.fromfile(base_path + '.bin', dtype=TENSOR_DTYPE)
        except FileNotFoundError:
            raise RepositoryError(f"checkpoint not found: {base_path}")
        except (OSError, json.JSONDecodeError) as error:
            raise RepositoryError(f"cannot read checkpoint {base_path}: {error}")
        return self._dict_to_params(manifest, blob, base_path)

    def _params_to_dict(self, params: ModelParams) -> Dict:
        tensors, offset = [], 0
        for name, value in params.items():
            tensors.append({'name': name, 'shape': list(value.shape), 'offset': offset})
            offset += value.size
        return {'kind': params.kind, 'tensors': tensors, 'meta': params.meta}

    def _dict_to_params(self, manifest: Dict, blob: np.ndarray, base_path: str) -> ModelParams:
        tensors = {}
        try:
            for entry in manifest['tensors']:
                shape = tuple(entry['shape'])
                size = int(np.prod(shape))
                start = entry['offset']
                if start + size > blob.size:
                    raise RepositoryError(f"checkpoint {base_path} is truncated at tensor {entry['name']!r}")
                tensors[entry['name']] = blob[start:start + size].reshape(shape)
            return ModelParams(tensors, kind=manifest['kind'], meta=manifest.get('meta'))
        except (KeyError, TypeError) as error:
            raise RepositoryError(f"malformed checkpoint manifest {base_path}: {error}")
        except InvalidArgumentError as error:
            raise RepositoryError(f"checkpoint {base_path}: {error}")
