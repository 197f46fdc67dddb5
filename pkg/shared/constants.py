FILE_PATH_ROOT = './data_store/'
DEFAULT_CONFIG_PATH = FILE_PATH_ROOT + 'default_config.json'

THREADS_ENV_VAR = 'PATCHTRIAGE_THREADS'

# anatomy labels of a LabelMask
LABEL_BACKGROUND = 0
LABEL_HEART = 1
LABEL_LEFT_LUNG = 2
LABEL_RIGHT_LUNG = 3
LUNG_LABELS = frozenset({LABEL_LEFT_LUNG, LABEL_RIGHT_LUNG})
ALL_LABELS = frozenset({LABEL_BACKGROUND, LABEL_HEART, LABEL_LEFT_LUNG, LABEL_RIGHT_LUNG})
NUM_LABELS = 4

# disease classes, index = class id
CLASS_NAMES = ('normal', 'bacterial', 'tb', 'viral_covid')
NUM_CLASSES = len(CLASS_NAMES)

# preprocessing
DEFAULT_GAMMA = 0.5
DEFAULT_GRAY_LEVELS = 256
MAX_GRAY = 255.0
SEGMENTATION_SIZE = 256
CLASSIFICATION_SIZE = 1024

# patches
DEFAULT_K = 100
DEFAULT_PATCH_SIZE = 224
MODEL_INPUT_SIZE = 56

# optimisation
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
PROB_CLAMP = 1e-12

# masks
UNDER_SEGMENTATION_FRACTION = 0.25

# statistics
STAR_LEVELS = ((0.001, '***'), (0.01, '**'), (0.05, '*'))
NO_STARS = '-'
SIGNED_RANK_EXACT_MAX_N = 12
RANK_SUM_EXACT_MAX_N = 16
KS_MIN_N = 5

# dataset splits
SPLIT_RATIOS = (('train', 0.7), ('val', 0.1), ('test', 0.2))
