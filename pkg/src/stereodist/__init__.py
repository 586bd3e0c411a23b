"""Disparity-distribution toolkit: sharpened soft-argmin readout, uncertainty
measures and their gradients, gradient-flow simulation, pseudo-labels,
sparsification curves, a classical matcher, and file codecs."""
from .errors import (
    DegenerateInputError,
    DivergenceError,
    FormatError,
    InputValidationError,
    RangeError,
    ResampleSignal,
    StereoDistError,
    StructuralError,
)
from .evaluation import ErrorStats, RocCurve, error_stats, roc_sparsification
from .matcher import SceneSpec, StereoPair, census_cost_volume, generate_stereogram, sad_cost_volume
from .objective import LossConfig, combined_loss, finite_difference_check, grad_combined_loss
from .pseudo_label import PseudoLabel, make_pseudo_label
from .uncertainty import MetricKind, UncertaintyMetric, entropy, msm, per, uncertainty_map
from .volume import anisotropic_softmax, hard_argmin, readout, soft_argmin

__version__ = "0.1.0"
