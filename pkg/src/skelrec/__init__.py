"""Skeleton-based action recognition with arrangement ensembles.

Three levels: joint arrangements turn a 25-frame skeleton sequence into a
set of maximally dissimilar 25x25x3 pseudo-images, one small classifier is
trained per arrangement, and a consensus MLP merges their posteriors into
the final prediction. The numeric core is a from-scratch reverse-mode
autodiff engine over numpy.
"""

from . import arrangement, autodiff, metrics, models, pipeline, pseudoimage, skeleton
from .arrangement import dissimilarity, max_dissimilarity, select_best
from .metrics import Metrics, compute_metrics, confusion_matrix
from .models import (
    CnnClassifier,
    CnnConfig,
    ConsensusConfig,
    ConsensusMlp,
    VitClassifier,
    VitConfig,
    fit,
)
from .pipeline import RunConfig, RunResult, compare_classifiers, run_ablation, run_pipeline
from .pseudoimage import encode
from .skeleton import ActionSequence, SplitPolicy, parse_skeleton_file, sample_frames

__version__ = "0.1.0"

__all__ = [
    "ActionSequence",
    "CnnClassifier",
    "CnnConfig",
    "ConsensusConfig",
    "ConsensusMlp",
    "Metrics",
    "RunConfig",
    "RunResult",
    "SplitPolicy",
    "VitClassifier",
    "VitConfig",
    "arrangement",
    "autodiff",
    "compare_classifiers",
    "compute_metrics",
    "confusion_matrix",
    "dissimilarity",
    "encode",
    "fit",
    "max_dissimilarity",
    "metrics",
    "models",
    "parse_skeleton_file",
    "pipeline",
    "pseudoimage",
    "run_ablation",
    "run_pipeline",
    "sample_frames",
    "select_best",
    "skeleton",
    "__version__",
]
