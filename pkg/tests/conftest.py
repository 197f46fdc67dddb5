import numpy as np
import pytest

from models import LabelMask, PatchConfig, PhantomSpec, PreprocessConfig
from pipeline import PatchClassifier, gen_phantom
from shared import set_threads


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def single_thread():
    set_threads(1)
    yield
    set_threads(1)


@pytest.fixture
def two_lung_mask():
    """12 x 12 mask: right lung rows 2-9 cols 1-4, left lung rows 2-9 cols 7-10, heart rows 6-8 cols 4-7."""
    labels = np.zeros((12, 12), dtype=np.uint8)
    labels[2:10, 1:5] = 3
    labels[2:10, 7:11] = 2
    labels[6:9, 4:8] = 1
    return LabelMask(labels)


@pytest.fixture
def tiny_classifier():
    """Reference architecture on 16 x 16 inputs: 16 -> 7 -> 3 feature grid."""
    return PatchClassifier.init_params(seed=7, num_classes=4, input_size=16)


@pytest.fixture
def small_phantom():
    def render(label: str = 'normal', seed: int = 0, size: int = 64, **overrides):
        return gen_phantom(PhantomSpec(label=label, size=size, seed=seed, **overrides))
    return render


@pytest.fixture
def small_patch_config():
    return PatchConfig(K=6, p=16, q=16, input_size=16, train_patches_per_image=3, val_patches_per_image=3,
                       chunk_size=4)


@pytest.fixture
def small_preprocess():
    return PreprocessConfig(target_size=32, classification_size=64)
