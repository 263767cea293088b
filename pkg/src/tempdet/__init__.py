"""tempdet: training-free softmax temperature determination.

Estimate the softmax temperature that maximizes test accuracy directly
from task shape (feature width, class count, dataset difficulty), refit
the model's coefficients from swept measurement grids, score dataset
difficulty from labeled features, and verify the logit-variance algebra
the estimate rests on.
"""
from __future__ import annotations

from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("tempdet")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .coefficients import (
    CLIP_HI_DEFAULT,
    CLIP_LO_DEFAULT,
    COEFFICIENT_VARIANTS,
    VARIANTS,
    TaskDescriptor,
    TemperatureCoefficients,
    coefficients_from_document,
    coefficients_to_document,
    default_coefficients,
    estimate_temperature,
    estimate_temperature_detail,
    load_coefficients,
    save_coefficients,
)
from .csg import (
    CsgConfig,
    CsgResult,
    LabeledFeatureSet,
    class_affinity,
    class_similarity,
    compute_csg,
    csg_result_to_document,
    csg_score,
    laplacian_spectrum,
    load_labeled_features,
    save_labeled_features_binary,
    save_labeled_features_text,
)
from .errors import InputError, NumericError
from .fitting import (
    GRID_COLUMNS,
    ConditionGrid,
    DifferentialEvolutionSettings,
    FitResult,
    FitSpec,
    TemperatureInterpolant,
    build_interpolant,
    coefficient_stability_report,
    differential_evolution,
    fit,
    objective,
    parse_grid_table,
    read_grid_file,
    write_grid_file,
)
from .losses import (
    ce_softmax_gradient,
    cross_entropy,
    loss_response_curve,
    max_prob_simulation,
    one_hot,
    shannon_entropy,
    smooth_labels,
    tempered_softmax,
)
from .tables import Table, read_table, write_table
from .variance import (
    DistributionSpec,
    LinearHeadScenario,
    RunningMoments,
    VarianceReport,
    analytic_logit_moments,
    correlation_factor,
    correlation_vs_difficulty_probe,
    frozen_weights,
    logit_variance_terms,
    mc_logit_moments,
    scaled_variance,
    uniform_correlation,
    variance_report_to_document,
)

__all__ = [
    "__version__",
    "CLIP_HI_DEFAULT",
    "CLIP_LO_DEFAULT",
    "COEFFICIENT_VARIANTS",
    "VARIANTS",
    "TaskDescriptor",
    "TemperatureCoefficients",
    "coefficients_from_document",
    "coefficients_to_document",
    "default_coefficients",
    "estimate_temperature",
    "estimate_temperature_detail",
    "load_coefficients",
    "save_coefficients",
    "CsgConfig",
    "CsgResult",
    "LabeledFeatureSet",
    "class_affinity",
    "class_similarity",
    "compute_csg",
    "csg_result_to_document",
    "csg_score",
    "laplacian_spectrum",
    "load_labeled_features",
    "save_labeled_features_binary",
    "save_labeled_features_text",
    "InputError",
    "NumericError",
    "GRID_COLUMNS",
    "ConditionGrid",
    "DifferentialEvolutionSettings",
    "FitResult",
    "FitSpec",
    "TemperatureInterpolant",
    "build_interpolant",
    "coefficient_stability_report",
    "differential_evolution",
    "fit",
    "objective",
    "parse_grid_table",
    "read_grid_file",
    "write_grid_file",
    "ce_softmax_gradient",
    "cross_entropy",
    "loss_response_curve",
    "max_prob_simulation",
    "one_hot",
    "shannon_entropy",
    "smooth_labels",
    "tempered_softmax",
    "Table",
    "read_table",
    "write_table",
    "DistributionSpec",
    "LinearHeadScenario",
    "RunningMoments",
    "VarianceReport",
    "analytic_logit_moments",
    "correlation_factor",
    "correlation_vs_difficulty_probe",
    "frozen_weights",
    "logit_variance_terms",
    "mc_logit_moments",
    "scaled_variance",
    "uniform_correlation",
    "variance_report_to_document",
]
