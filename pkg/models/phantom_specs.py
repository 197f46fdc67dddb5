import hashlib
import json
from dataclasses import asdict, dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np

from shared import InvalidArgumentError
from shared.constants import CLASS_NAMES
from .label_masks import LabelMask
from .markers import MaskStats


@dataclass(frozen=True)
class LesionParams:
    """Lesion layer of one class: count range, radius range, signed contrast range.

    Radii are fractions of the image size, except for the bacterial opacity whose
    semi-axes are fractions of the lung semi-axes. The tb count is per lung.
    """
    count: Tuple[int, int] = (0, 0)
    radius: Tuple[float, float] = (0.0, 0.0)
    contrast: Tuple[float, float] = (0.0, 0.0)


DEFAULT_LESIONS = {
    'normal': LesionParams(),
    'bacterial': LesionParams(count=(1, 1), radius=(0.9, 1.2), contrast=(90.0, 120.0)),
    'tb': LesionParams(count=(2, 5), radius=(0.03, 0.05), contrast=(70.0, 110.0)),
    'viral_covid': LesionParams(count=(4, 10), radius=(0.035, 0.06), contrast=(-40.0, -25.0)),
}


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry, intensities and lesion layer of one synthetic radiograph.

    Positions and axes are fractions of the image size; intensities are 8-bit
    raw values. The heart semi-axis across columns is heart_semi_cols when
    given, otherwise ctr_ratio times the lung half-span.
    """
    label: str = 'normal'
    size: int = 1024
    lung_center_row: float = 0.48
    lung_offset_col: float = 0.21
    lung_semi_rows: float = 0.30
    lung_semi_cols: float = 0.15
    heart_center_row: float = 0.62
    heart_center_col: float = 0.53
    heart_semi_rows: float = 0.12
    heart_semi_cols: Optional[float] = None
    ctr_ratio: float = 0.45
    body_semi_rows: float = 0.48
    body_semi_cols: float = 0.46
    air_level: float = 35.0
    tissue_level: float = 150.0
    lung_level: float = 75.0
    heart_level: float = 210.0
    rib_amplitude: float = 8.0
    rib_period: float = 0.06
    noise_sigma: float = 6.0
    lesions: Optional[LesionParams] = None
    seed: int = 0

    def __post_init__(self):
        if self.label not in CLASS_NAMES:
            raise InvalidArgumentError(f"unknown phantom class {self.label!r}")
        if self.size < 32:
            raise InvalidArgumentError(f"phantom size must be >= 32, got {self.size}")
        if self.noise_sigma < 0.0:
            raise InvalidArgumentError("noise sigma must be non-negative")
        if self.heart_semi_cols is not None and not self.heart_semi_cols > 0.0:
            raise InvalidArgumentError(f"heart_semi_cols must be > 0, got {self.heart_semi_cols}")
        lesions = self.lesion_params
        if lesions.count[0] < 0 or lesions.count[1] < lesions.count[0]:
            raise InvalidArgumentError(f"lesion count range must satisfy 0 <= lo <= hi, got {lesions.count}")

    @property
    def lesion_params(self) -> LesionParams:
        return self.lesions if self.lesions is not None else DEFAULT_LESIONS[self.label]

    @property
    def class_id(self) -> int:
        return CLASS_NAMES.index(self.label)

    @property
    def heart_half_width(self) -> float:
        if self.heart_semi_cols is not None:
            return self.heart_semi_cols
        return self.ctr_ratio * (self.lung_offset_col + self.lung_semi_cols)

    @property
    def cardiac_span(self) -> float:
        left = max(self.heart_center_col - self.heart_half_width, 0.0)
        right = min(self.heart_center_col + self.heart_half_width, 1.0)
        return right - left

    @property
    def thoracic_span(self) -> float:
        """Outer edge of the right lung to outer edge of the left lung."""
        left = max(0.5 - self.lung_offset_col - self.lung_semi_cols, 0.0)
        right = min(0.5 + self.lung_offset_col + self.lung_semi_cols, 1.0)
        return right - left

    @property
    def analytic_ctr(self) -> float:
        return self.cardiac_span / self.thoracic_span

    def with_seed(self, seed: int) -> 'PhantomSpec':
        return replace(self, seed=seed)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['lesions'] = asdict(self.lesion_params)
        return data

    def digest(self) -> str:
        data = self.to_dict()
        data.pop('seed')
        payload = json.dumps(data, sort_keys=True, separators=(',', ':')).encode('utf-8')
        return hashlib.sha256(payload).hexdigest()


class Phantom:
    """A rendered phantom: raw 8-bit image, truth mask, class and analytic geometry."""

    def __init__(self, spec: PhantomSpec, raw: np.ndarray, mask: LabelMask, stats: MaskStats,
                 lesion_straddles: bool, n_lesions: int):
        self.spec = spec
        self.raw = raw
        self.mask = mask
        self.stats = stats
        self.lesion_straddles = lesion_straddles
        self.n_lesions = n_lesions

    @property
    def label(self) -> str:
        return self.spec.label

    @property
    def analytic_ctr(self) -> float:
        return self.spec.analytic_ctr

    def __str__(self):
        return f"Phantom({self.label}, seed={self.spec.seed}, lesions={self.n_lesions})"
