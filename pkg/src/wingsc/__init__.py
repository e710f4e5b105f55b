"""Robust sparse-coding classification with wing-loss fidelity and learned pixel weights."""

from .admm import (
    AdmmConfig,
    NumericalFailureError,
    SolverState,
    SolveResult,
    objective_value,
    solve,
)
from .classify import ClassificationResult, Dictionary, class_mask, classify, recognition_rate
from .dataops import (
    CorruptionSpec,
    GrayImage,
    ProjectionOp,
    apply_projection,
    build_dictionary,
    corrupt_uniform,
    image_to_vector,
    load_pgm,
    make_projection,
    occlude_block,
    save_pgm,
    synth_dataset,
    vector_to_image,
)
from .wing import (
    DegenerateThresholdError,
    WeightParams,
    WeightState,
    WingParams,
    compute_weights,
    residual_threshold,
    soft_threshold,
    wing_loss,
    wing_penalty,
)

__version__ = "0.1.0"
