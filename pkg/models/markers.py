from typing import Dict, List, Optional

from shared import InvalidArgumentError
from .test_results import TestResult


class MaskStats:
    """Areas and maximal transverse widths read off a label mask."""

    def __init__(self, lung_area: int, heart_area: int, cardiac_width: int, thoracic_width: int):
        self.lung_area = int(lung_area)
        self.heart_area = int(heart_area)
        self.cardiac_width = int(cardiac_width)
        self.thoracic_width = int(thoracic_width)

    @property
    def ctr(self) -> Optional[float]:
        if self.cardiac_width == 0 or self.thoracic_width == 0:
            return None
        return self.cardiac_width / self.thoracic_width

    def to_dict(self) -> Dict:
        return {
            'lung_area': self.lung_area,
            'heart_area': self.heart_area,
            'cardiac_width': self.cardiac_width,
            'thoracic_width': self.thoracic_width,
            'ctr': self.ctr,
        }

    def __str__(self):
        return f"MaskStats(lung={self.lung_area}, heart={self.heart_area}, ctr={self.ctr})"


class IntensityStats:
    """Mean and population STD of intensities normalized to [0, 1]."""

    def __init__(self, mean: float, std: float, n_pixels: int):
        if std < 0.0 or n_pixels < 1:
            raise InvalidArgumentError("intensity stats need std >= 0 and at least one pixel")
        self.mean = float(mean)
        self.std = float(std)
        self.n_pixels = int(n_pixels)

    def to_dict(self) -> Dict:
        return {'mean': self.mean, 'std': self.std, 'n_pixels': self.n_pixels}

    def __str__(self):
        return f"IntensityStats(mean={self.mean:.4f}, std={self.std:.4f}, n={self.n_pixels})"


class PairwiseCell:
    """Rank-sum comparison of one marker between two distinct classes."""

    def __init__(self, marker: str, class_a: str, class_b: str, result: TestResult, stars: str):
        if class_a == class_b:
            raise InvalidArgumentError(f"pairwise cell needs two distinct classes, got {class_a!r} twice")
        self.marker = marker
        self.class_a = class_a
        self.class_b = class_b
        self.result = result
        self.stars = stars

    def to_dict(self) -> Dict:
        return {
            'marker': self.marker,
            'class_a': self.class_a,
            'class_b': self.class_b,
            'stars': self.stars,
            **self.result.to_dict(),
        }


class MarkerTable:
    """Per-class marker values, normality checks and pairwise rank-sum tests."""

    def __init__(self, classes: List[str], values: Dict[str, Dict[str, List[float]]],
                 normality: Dict[str, Dict[str, Optional[TestResult]]], pairwise: List[PairwiseCell],
                 excluded_patches: Dict[str, int], under_segmented: Optional[Dict[str, int]] = None):
        self.classes = list(classes)
        self.values = values
        self.normality = normality
        self.pairwise = pairwise
        self.excluded_patches = excluded_patches
        self.under_segmented = under_segmented

    @property
    def markers(self) -> List[str]:
        return list(self.values)

    def cell(self, marker: str, class_a: str, class_b: str) -> PairwiseCell:
        for cell in self.pairwise:
            if cell.marker == marker and {cell.class_a, cell.class_b} == {class_a, class_b}:
                return cell
        raise KeyError((marker, class_a, class_b))

    def to_dict(self) -> Dict:
        return {
            'classes': self.classes,
            'values': self.values,
            'normality': {
                marker: {name: (result.to_dict() if result is not None else None)
                         for name, result in per_class.items()}
                for marker, per_class in self.normality.items()
            },
            'pairwise': [cell.to_dict() for cell in self.pairwise],
            'excluded_patches': self.excluded_patches,
            'under_segmented': self.under_segmented,
        }

    def __str__(self):
        return f"MarkerTable(classes={self.classes}, markers={self.markers})"
