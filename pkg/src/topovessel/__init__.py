"""Topology-aware arteriole/venule segmentation toolkit: preprocessing, cake
wavelets, centerline-aware losses with gradients, skeletons and geodesic
distances, evaluation metrics and synthetic vessel trees."""

from .cakewavelets import CakeBank, CakeParams, build_bank, orientation_scores
from .metrics import MetricReport, aggregate_scores, av_classification_metrics, roc
from .preprocess import PreprocessParams, correct_illumination, enhance_vessels
from .raster import AVGroundTruth, LabelPolicy, decode_rite_label, rgb_to_gray, threshold
from .skeletal import branch_decompose, geodesic_distance, thin
from .synthgen import TreeSpec, generate, perturb
from .topoloss import GatePolicy, LossWeights, SoftSkelParams, loss_gradient, soft_skeleton, total_loss

__version__ = "0.1.0"

__all__ = [
    "AVGroundTruth",
    "CakeBank",
    "CakeParams",
    "GatePolicy",
    "LabelPolicy",
    "LossWeights",
    "MetricReport",
    "PreprocessParams",
    "SoftSkelParams",
    "TreeSpec",
    "aggregate_scores",
    "av_classification_metrics",
    "branch_decompose",
    "build_bank",
    "correct_illumination",
    "decode_rite_label",
    "enhance_vessels",
    "generate",
    "geodesic_distance",
    "loss_gradient",
    "orientation_scores",
    "perturb",
    "rgb_to_gray",
    "roc",
    "soft_skeleton",
    "thin",
    "threshold",
    "total_loss",
]
