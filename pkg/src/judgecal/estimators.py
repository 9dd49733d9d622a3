"""Point estimators for a binary mean under noisy judge labels.

All estimators target theta = P(Y = 1). They are pure functions of the
dataset (and, for the power-tuned variant, a scalar weight), so repeated
calls agree bit for bit. Variance formulas and interval construction live
in ``inference``.
"""

from dataclasses import dataclass

import numpy as np

from .datasets import BinaryDataset, CalibrationSummary, summarize_calibration
from .errors import (
    ConstantSurrogate,
    DegenerateCalibrationClass,
    DegenerateSurrogateCell,
    EmptyTestSet,
    NearSingularCorrection,
)

# Estimator keys used across reports, the CLI, and diagnostics.
NAIVE = "naive"
RG = "rg"
PPI = "ppi"
PPI_PLUS = "ppi++"
MLE = "mle"
EIF = "eif"
BINARY_ESTIMATORS = (NAIVE, RG, PPI, PPI_PLUS, MLE, EIF)

#: |q0 + q1 - 1| below this is treated as a non-invertible judge.
IDENTIFIABILITY_EPS = 1e-6


@dataclass(frozen=True)
class JudgeErrorRates:
    """Specificity q0 = P(Yhat=0 | Y=0) and sensitivity q1 = P(Yhat=1 | Y=1)."""

    q0: float
    q1: float

    def __post_init__(self):
        if not (0.0 <= self.q0 <= 1.0 and 0.0 <= self.q1 <= 1.0):
            raise ValueError("error rates must lie in [0, 1]")

    @property
    def kappa(self) -> float:
        """Discrimination index q0 + q1 - 1; zero means an uninformative judge."""
        return self.q0 + self.q1 - 1.0

    @property
    def identifiable(self) -> bool:
        return abs(self.kappa) >= IDENTIFIABILITY_EPS


@dataclass(frozen=True)
class PointEstimate:
    theta_hat: float
    estimator: str
    lam: float | None = None
    clamped: bool = False


def naive_estimate(data: BinaryDataset) -> PointEstimate:
    """Plain proportion of judge-positive labels on the test set.

    Biased whenever the judge is imperfect; kept as the baseline every
    corrected estimator is compared against.
    """
    if data.n == 0:
        raise EmptyTestSet("naive estimator needs at least one test observation")
    return PointEstimate(float(np.mean(data.test_yhat)), NAIVE)


def estimate_error_rates(summary: CalibrationSummary) -> JudgeErrorRates:
    """Plug-in sensitivity/specificity from the calibration cell counts."""
    if summary.m1 == 0:
        raise DegenerateCalibrationClass(1)
    if summary.m0 == 0:
        raise DegenerateCalibrationClass(0)
    return JudgeErrorRates(q0=summary.x00 / summary.m0, q1=summary.x11 / summary.m1)


def rogan_gladen_estimate(p_hat: float, rates: JudgeErrorRates) -> PointEstimate:
    """Invert the misclassification relation p = (q0+q1-1) theta + (1-q0).

    The raw inversion can land outside [0, 1] in finite samples; the result
    is clamped and flagged rather than rejected so simulation pipelines can
    keep running while recording the distortion.
    """
    if not rates.identifiable:
        raise NearSingularCorrection(
            f"|q0+q1-1| = {abs(rates.kappa):.3g} is below {IDENTIFIABILITY_EPS:g}"
        )
    # Grouping (q0 - 1) first makes the perfect-judge case return p_hat exactly.
    raw = (p_hat + (rates.q0 - 1.0)) / rates.kappa
    if raw < 0.0:
        return PointEstimate(0.0, RG, clamped=True)
    if raw > 1.0:
        return PointEstimate(1.0, RG, clamped=True)
    return PointEstimate(raw, RG)


def _power_tuned_value(data: BinaryDataset, lam: float) -> float:
    """Shared arithmetic for the power-tuned family.

    Held in one place so that the lam=1 special case is bit-identical to
    the plain residual-corrected estimator.
    """
    if data.n == 0:
        raise EmptyTestSet("residual correction needs at least one test observation")
    y_bar = float(np.mean(data.cal_y))
    yhat_bar = float(np.mean(data.cal_yhat))
    p_hat = float(np.mean(data.test_yhat))
    return y_bar + lam * (p_hat - yhat_bar)


def ppi_estimate(data: BinaryDataset) -> PointEstimate:
    """Test-set judge mean, bias-corrected by the calibration residual mean.

    Unbiased for every n >= 1 and m >= 1 no matter how poor the judge is.
    """
    return PointEstimate(_power_tuned_value(data, 1.0), PPI)


def ppi_plus_estimate(data: BinaryDataset, lam: float) -> PointEstimate:
    """Power-tuned variant: y_bar_cal + lam * (p_hat_test - yhat_bar_cal).

    lam=0 collapses to the calibration-only mean and lam=1 reproduces
    ``ppi_estimate`` exactly; intermediate values trade the two sources.
    """
    return PointEstimate(_power_tuned_value(data, lam), PPI_PLUS, lam=float(lam))


def optimal_lambda(data: BinaryDataset) -> float:
    """Plug-in variance-minimizing weight (n/N) * Cov(Y, Yhat) / Var(Yhat).

    Both moments are taken on the calibration set since the covariance
    needs paired labels. Raises ConstantSurrogate when the judge labels do
    not vary there; callers typically fall back to lam = 0.
    """
    if data.m < 2:
        raise ConstantSurrogate("need at least two calibration pairs for sample moments")
    var = float(np.var(data.cal_yhat, ddof=1))
    if var == 0.0:
        raise ConstantSurrogate("judge labels are constant on the calibration set")
    cov = float(np.cov(data.cal_y, data.cal_yhat, ddof=1)[0, 1])
    return (data.n / data.total) * cov / var


def eif_binary_estimate(data: BinaryDataset) -> PointEstimate:
    """Impute the conditional mean of Y given Yhat everywhere, then add the
    average calibration residual.

    Algebraically this equals the power-tuned estimator at
    lam = (n/N) * (mu1_hat - mu0_hat), which is the efficient choice in the
    binary case.
    """
    summary = summarize_calibration(data)
    if summary.mu1_hat is None:
        raise DegenerateSurrogateCell(1)
    if summary.mu0_hat is None:
        raise DegenerateSurrogateCell(0)
    mu_cal = np.where(data.cal_yhat == 1, summary.mu1_hat, summary.mu0_hat)
    mu_test = np.where(data.test_yhat == 1, summary.mu1_hat, summary.mu0_hat)
    mu_all = np.concatenate([mu_cal, mu_test])
    theta = float(np.mean(mu_all)) + float(np.sum(data.cal_y - mu_cal)) / data.m
    return PointEstimate(theta, EIF)
