from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

from shared import ConfigError
from shared.constants import (CLASS_NAMES,
                              CLASSIFICATION_SIZE,
                              DEFAULT_GAMMA,
                              DEFAULT_GRAY_LEVELS,
                              DEFAULT_K,
                              DEFAULT_PATCH_SIZE,
                              FILE_PATH_ROOT,
                              MODEL_INPUT_SIZE,
                              NUM_CLASSES,
                              SEGMENTATION_SIZE)


def _check_type(owner: str, name: str, expected: Any, value: Any) -> Any:
    if isinstance(expected, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{owner}.{name} must be a boolean, got {value!r}")
        return value
    if isinstance(expected, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{owner}.{name} must be an integer, got {value!r}")
        return value
    if isinstance(expected, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{owner}.{name} must be a number, got {value!r}")
        return float(value)
    if isinstance(expected, str):
        if not isinstance(value, str):
            raise ConfigError(f"{owner}.{name} must be a string, got {value!r}")
        return value
    if isinstance(expected, tuple):
        if not isinstance(value, (list, tuple)) or not all(isinstance(item, str) for item in value):
            raise ConfigError(f"{owner}.{name} must be a list of strings, got {value!r}")
        return tuple(value)
    return value


class _ConfigBlock:
    """Strict dict <-> dataclass mapping shared by every config block."""

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]):
        data = {} if data is None else data
        if not isinstance(data, dict):
            raise ConfigError(f"{cls.__name__} must be a JSON object, got {type(data).__name__}")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown {cls.__name__} keys: {unknown}")
        defaults = cls()
        values = {}
        for name, value in data.items():
            default = getattr(defaults, name)
            if isinstance(default, _ConfigBlock):
                values[name] = type(default).from_dict(value)
            elif default is None:
                values[name] = value
            else:
                values[name] = _check_type(cls.__name__, name, default, value)
        try:
            return replace(defaults, **values)
        except ConfigError:
            raise
        except (TypeError, ValueError) as error:
            raise ConfigError(f"invalid {cls.__name__}: {error}")

    def to_dict(self) -> Dict[str, Any]:
        return _listify(asdict(self))


def _listify(value):
    if isinstance(value, dict):
        return {key: _listify(item) for key, item in value.items()}
    if isinstance(value, tuple):
        return [_listify(item) for item in value]
    return value


@dataclass(frozen=True)
class PreprocessConfig(_ConfigBlock):
    gamma: float = DEFAULT_GAMMA
    gray_levels: int = DEFAULT_GRAY_LEVELS
    target_size: int = SEGMENTATION_SIZE
    classification_size: int = CLASSIFICATION_SIZE

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.gray_levels < 2:
            raise ConfigError(f"gray_levels must be >= 2, got {self.gray_levels}")
        if self.target_size < 1 or self.classification_size < 1:
            raise ConfigError("target sizes must be >= 1")

    def for_classification(self) -> 'PreprocessConfig':
        return replace(self, target_size=self.classification_size)


@dataclass(frozen=True)
class PatchConfig(_ConfigBlock):
    K: int = DEFAULT_K
    p: int = DEFAULT_PATCH_SIZE
    q: int = DEFAULT_PATCH_SIZE
    input_size: int = MODEL_INPUT_SIZE
    apply_mask: bool = True
    train_patches_per_image: int = 24
    val_patches_per_image: int = 20
    chunk_size: int = 16

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.p < 1 or self.q < 1:
            raise ConfigError(f"patch size must be positive, got {self.p}x{self.q}")
        if self.input_size < 7:
            raise ConfigError(f"input_size must be >= 7 for two stride-2 3x3 convolutions, got {self.input_size}")
        if self.train_patches_per_image < 1 or self.val_patches_per_image < 1 or self.chunk_size < 1:
            raise ConfigError("per-image patch counts and chunk_size must be >= 1")


@dataclass(frozen=True)
class TrainConfig(_ConfigBlock):
    learning_rate: float = 2e-3
    weight_decay: float = 1e-4
    l1_coeff: float = 1e-6
    batch_size: int = 16
    max_epochs: int = 40
    patience: int = 8
    train_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0.0 or self.l1_coeff < 0.0:
            raise ConfigError("weight_decay and l1_coeff must be non-negative")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1 or self.patience < 0:
            raise ConfigError("max_epochs must be >= 1 and patience >= 0")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1], got {self.train_fraction}")


@dataclass(frozen=True)
class SegmenterConfig(_ConfigBlock):
    learning_rate: float = 5e-2
    weight_decay: float = 0.0
    l1_coeff: float = 0.0
    batch_size: int = 2
    max_epochs: int = 80
    patience: int = 10
    lr_factor: float = 10.0
    lr_patience: int = 5
    pixels_per_image: int = 4096
    train_classes: Tuple[str, ...] = ('normal',)
    train_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0.0 or self.l1_coeff < 0.0:
            raise ConfigError("weight_decay and l1_coeff must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 0:
            raise ConfigError("batch_size and max_epochs must be >= 1, patience >= 0")
        if self.lr_factor < 1.0 or self.lr_patience < 1:
            raise ConfigError("lr_factor must be >= 1 and lr_patience >= 1")
        if self.pixels_per_image < 1:
            raise ConfigError("pixels_per_image must be >= 1")
        unknown = sorted(set(self.train_classes) - set(CLASS_NAMES))
        if unknown or not self.train_classes:
            raise ConfigError(f"train_classes must be a non-empty subset of {list(CLASS_NAMES)}, got {unknown}")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1], got {self.train_fraction}")

    def as_train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, weight_decay=self.weight_decay,
                           l1_coeff=self.l1_coeff, batch_size=self.batch_size, max_epochs=self.max_epochs,
                           patience=self.patience, train_fraction=self.train_fraction, seed=self.seed)


@dataclass(frozen=True)
class SaliencyConfig(_ConfigBlock):
    class_id: int = NUM_CLASSES - 1
    write_sidecar: bool = True
    write_overlay: bool = False

    def __post_init__(self):
        if not 0 <= self.class_id < NUM_CLASSES:
            raise ConfigError(f"class_id must lie in [0, {NUM_CLASSES}), got {self.class_id}")


@dataclass(frozen=True)
class PhantomConfig(_ConfigBlock):
    n_per_class: int = 100
    size: int = CLASSIFICATION_SIZE
    noise_sigma: float = 6.0
    ctr_ratio: float = 0.45
    classes: Tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        if self.n_per_class < 10:
            raise ConfigError(f"n_per_class must be >= 10, got {self.n_per_class}")
        if self.size < 32:
            raise ConfigError(f"phantom size must be >= 32, got {self.size}")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be non-negative")
        if not 0.1 <= self.ctr_ratio <= 0.8:
            raise ConfigError(f"ctr_ratio must lie in [0.1, 0.8], got {self.ctr_ratio}")
        unknown = sorted(set(self.classes) - set(CLASS_NAMES))
        if unknown or not self.classes:
            raise ConfigError(f"classes must be a non-empty subset of {list(CLASS_NAMES)}, got {unknown}")


@dataclass(frozen=True)
class BiomarkerConfig(_ConfigBlock):
    split: str = 'all'
    correct_patches_only: bool = False
    use_predicted_masks: bool = False

    def __post_init__(self):
        if self.split not in ('all', 'train', 'val', 'test'):
            raise ConfigError(f"split must be one of all/train/val/test, got {self.split!r}")


@dataclass(frozen=True)
class RunConfig(_ConfigBlock):
    seed: int = 0
    data_root: str = FILE_PATH_ROOT + 'phantoms'
    output_dir: str = FILE_PATH_ROOT + 'runs'
    classifier_checkpoint: str = ''
    segmenter_checkpoint: str = ''
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    patches: PatchConfig = field(default_factory=PatchConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    saliency: SaliencyConfig = field(default_factory=SaliencyConfig)
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    biomarkers: BiomarkerConfig = field(default_factory=BiomarkerConfig)
