from .raster_images import RasterImage
from .label_masks import LabelMask
from .patches import Patch, PatchPlacement, CoverageMap
from .network_params import ModelParams, Logits, FeatureMaps, SegPrediction, ClassWeights
from .verdicts import PatchProbs, Verdict, LocalClassification
from .saliency_maps import SaliencyMap, ChannelWeights, PATCH_SCOPE, IMAGE_SCOPE
from .test_results import TestResult, EXACT, APPROXIMATE
from .markers import MaskStats, IntensityStats, PairwiseCell, MarkerTable
from .confusion_matrices import ConfusionMatrix, ClassMetrics, MetricsReport, METRIC_NAMES
from .phantom_specs import PhantomSpec, LesionParams, Phantom, DEFAULT_LESIONS
from .configs import (PreprocessConfig,
                      PatchConfig,
                      TrainConfig,
                      SegmenterConfig,
                      SaliencyConfig,
                      PhantomConfig,
                      BiomarkerConfig,
                      RunConfig)
from .training_runs import PatchSet, TrainingResult, LabeledImage
