"""Measure adversarial image perturbations and relate them to detector verdicts."""
from .errors import (
    AdvMetricsError,
    DegenerateInput,
    FormatError,
    MissingFeature,
    ParseError,
    ShapeMismatch,
    SpecError,
    UnknownLabel,
)
from .features import FEATURE_NAMES, NORM_FEATURES, QUALITY_FEATURES, metric_vector
from .forest import (
    EvalReport,
    ForestHyperparams,
    ForestModel,
    LooReport,
    SampleRecord,
    evaluate,
    leave_one_attack_out,
    load_model,
    pearson,
    predict,
    rank_features,
    save_model,
    stratified_split,
    train,
)
from .norms import NormQuadruple, compute_norms
from .quality import QualityConfig, QualityVector, quality_vector
from .tensor import ImagePair, ImageTensor, diff, load_png, make_pair, save_png

__version__ = "0.1.0"
