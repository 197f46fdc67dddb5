from .core import resize_image, resize_mask, apply_mask, crop, embed, bilinear
from .preprocess import cast_to_float, hist_equalize, gamma_correct, preprocess_pipeline
from .segmask import (jaccard,
                      jaccard_per_structure,
                      ctr,
                      mask_stats,
                      under_segmentation_flag,
                      lung_pixel_coords,
                      compare_segmentations)
from .patches import sample_centers, place_patch, extract_patches, coverage
from .network import (softmax,
                      seg_loss,
                      classifier_forward,
                      classifier_backward,
                      segmenter_predict,
                      inverse_frequency_weights,
                      PatchClassifier,
                      PixelSegmenter)
from .infer import (classify_patches,
                    majority_vote,
                    classify_image,
                    classify_global,
                    build_patch_sets,
                    prepare_image,
                    LOCAL_APPROACH,
                    GLOBAL_APPROACH)
from .training import AdamState, adam_step, train_classifier, train_segmenter
from .saliency import grad_cam, grad_cams, prob_grad_cam, global_grad_cam, overlay
from .biomarkers import (MarkerSample,
                         lung_intensity_stats,
                         patch_intensity_stats,
                         marker_report,
                         render_marker_table)
from .stats import ks_normality, wilcoxon_signed_rank, wilcoxon_rank_sum, significance_stars
from .metrics import confusion, metrics_from_confusion, evaluate_predictions, render_metrics_table
from .phantom import gen_phantom, gen_dataset, plan_dataset
