"""judgecal: debiased mean estimation from noisy judge labels.

A small calibration set with paired (human, judge) labels plus a large
judge-only test set yield unbiased point estimates and calibrated
confidence intervals for the human mean (for example, a win rate).
Implemented estimators: the naive judge mean, the Rogan-Gladen
misclassification inversion, residual-corrected PPI and its power-tuned
variant, the joint MLE of the three-parameter misclassification model,
and the efficient one-step (EIF) estimator, for both binary and
continuous outcomes.
"""

from .calibration import (
    CATEGORICAL,
    LINEAR,
    MU_FAMILIES,
    SPLINE,
    CalibrationModel,
    eif_continuous_estimate,
    estimate_all_continuous,
    fit_calibration_model,
)
from .dataio import (
    LabeledRecord,
    SplitSpec,
    apply_split,
    read_records,
    read_report,
    records_to_dataset,
    split_coverage_experiment,
    write_records,
    write_report,
)
from .datasets import BinaryDataset, CalibrationSummary, ContinuousDataset, summarize_calibration
from .errors import DataFormatError, EstimationError
from .estimators import (
    BINARY_ESTIMATORS,
    EIF,
    MLE,
    NAIVE,
    PPI,
    PPI_PLUS,
    RG,
    JudgeErrorRates,
    PointEstimate,
    eif_binary_estimate,
    estimate_error_rates,
    naive_estimate,
    optimal_lambda,
    ppi_estimate,
    ppi_plus_estimate,
    rogan_gladen_estimate,
)
from .identities import run_identity_check
from .inference import (
    ConfidenceInterval,
    InferenceResult,
    PopulationParams,
    VarianceEstimate,
    eif_variance,
    estimate_all,
    logit_ci,
    mle_variance,
    naive_variance,
    optimal_lambda_population,
    plug_in_variance,
    ppi_plus_variance,
    ppi_variance,
    rg_variance,
    wald_ci,
)
from .mle import MleFitResult, MleParams, NewtonConfig, expected_information, fit_mle, log_likelihood, score
from .simulate import (
    BinarySimConfig,
    CalibrationRmseReport,
    ContinuousSimConfig,
    MonteCarloReport,
    calibration_rmse_study,
    default_binary_grid,
    generate_binary_dataset,
    generate_mixture_dataset,
    replicate_rng,
    run_grid,
)

__version__ = "0.1.0"
