import json
import os
from typing import Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from models import LabelMask, SaliencyMap
from shared import InvalidArgumentError, RepositoryError

SIDECAR_DTYPE = '<f4'


class ImageRepo:
    """Raster persistence: PGM (P5, 8/16 bit), 8-bit PNG and raw float32 sidecars."""

    def read_raw(self, file_path: str) -> np.ndarray:
        """uint8 or uint16 pixels of a PGM or PNG file."""
        try:
            with Image.open(file_path) as image:
                mode = image.mode
                pixels = np.array(image)
        except (OSError, UnidentifiedImageError) as error:
            raise RepositoryError(f"cannot read image {file_path}: {error}")
        if mode in ('L', 'P'):
            return pixels.astype(np.uint8)
        if mode.startswith('I'):
            if pixels.min() < 0 or pixels.max() > 65535:
                raise RepositoryError(f"{file_path} holds values outside the 16-bit range")
            return pixels.astype(np.uint16)
        raise RepositoryError(f"{file_path} is not a grayscale image (mode {mode})")

    def write_pgm(self, file_path: str, raw: np.ndarray) -> None:
        raw = np.asarray(raw)
        if raw.ndim != 2 or raw.dtype not in (np.uint8, np.uint16):
            raise InvalidArgumentError(f"PGM needs a 2-D uint8 or uint16 raster, got {raw.dtype} {raw.shape}")
        # pillow writes mode I as big-endian 16-bit P5 with maxval 65535
        image = Image.fromarray(raw.astype(np.int32) if raw.dtype == np.uint16 else raw)
        self._save(image, file_path, 'PPM')

    def write_png(self, file_path: str, pixels: np.ndarray) -> None:
        pixels = np.asarray(pixels)
        if pixels.ndim != 2 or pixels.dtype != np.uint8:
            raise InvalidArgumentError(f"PNG output needs a 2-D uint8 grid, got {pixels.dtype} {pixels.shape}")
        self._save(Image.fromarray(pixels), file_path, 'PNG')

    def read_mask(self, file_path: str) -> LabelMask:
        labels = self.read_raw(file_path)
        if labels.dtype != np.uint8:
            raise RepositoryError(f"mask {file_path} must be 8-bit")
        try:
            return LabelMask(labels)
        except InvalidArgumentError as error:
            raise RepositoryError(f"mask {file_path}: {error}")

    def write_mask(self, file_path: str, mask: LabelMask) -> None:
        self.write_png(file_path, mask.labels.astype(np.uint8))

    def write_saliency(self, file_path: str, saliency: SaliencyMap, sidecar: bool = True) -> None:
        """PNG with value round(255 * v), plus the float values next to it when sidecar is set."""
        self.write_png(file_path, np.rint(255.0 * saliency.values).astype(np.uint8))
        if sidecar:
            self.write_sidecar(os.path.splitext(file_path)[0], saliency.values)

    def write_sidecar(self, base_path: str, values: np.ndarray) -> Tuple[str, str]:
        values = np.asarray(values, dtype=SIDECAR_DTYPE)
        data_path, header_path = base_path + '.f32', base_path + '.json'
        try:
            values.tofile(data_path)
            with open(header_path, 'w') as file_writer:
                json.dump({'height': values.shape[0], 'width': values.shape[1], 'dtype': 'float32le'},
                          file_writer, indent=2, sort_keys=True)
        except OSError as error:
            raise RepositoryError(f"cannot write sidecar {data_path}: {error}")
        return data_path, header_path

    def read_sidecar(self, base_path: str) -> np.ndarray:
        try:
            with open(base_path + '.json', 'r') as file_reader:
                header = json.load(file_reader)
            values = np.fromfile(base_path + '.f32', dtype=SIDECAR_DTYPE)
        except (OSError, ValueError) as error:
            raise RepositoryError(f"cannot read sidecar {base_path}: {error}")
        shape = (header['height'], header['width'])
        if values.size != shape[0] * shape[1]:
            raise RepositoryError(f"sidecar {base_path} holds {values.size} values, header says {shape}")
        return values.reshape(shape)

    def _save(self, image: Image.Image, file_path: str, image_format: str) -> None:
        try:
            image.save(file_path, format=image_format)
        except (OSError, ValueError) as error:
            raise RepositoryError(f"cannot write image {file_path}: {error}")
