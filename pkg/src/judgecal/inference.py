"""Asymptotic variance formulas, plug-in standard errors, and intervals.

Every closed-form variance is written once against the parameter vector
(theta, q0, q1, p, gamma1) where p is the marginal judge-positive rate and
gamma1 the test/calibration size ratio. The theory path feeds population
values through ``PopulationParams``; the data path feeds plug-in values
through ``plug_in_variance``. Sharing one implementation prevents the two
paths from drifting apart.

All variances are on the sqrt(N)-scale: Var(theta_hat) ~ v_n / N.
"""

from dataclasses import dataclass, field

import numpy as np

from .datasets import BinaryDataset, CalibrationSummary, summarize_calibration
from .errors import (
    ConstantSurrogate,
    DegenerateSurrogateDistribution,
    EmptyTestSet,
    EstimationError,
    NearSingularCorrection,
)
from .estimators import (
    BINARY_ESTIMATORS,
    EIF,
    IDENTIFIABILITY_EPS,
    MLE,
    NAIVE,
    PPI,
    PPI_PLUS,
    RG,
    PointEstimate,
    eif_binary_estimate,
    estimate_error_rates,
    naive_estimate,
    optimal_lambda,
    ppi_estimate,
    ppi_plus_estimate,
    rogan_gladen_estimate,
)
from .numerics import expit, logit, normal_quantile

CLOSED_FORM_PLUG_IN = "closed_form_plug_in"
EMPIRICAL_IF = "empirical_if"

TRANSFORM_LOGIT = "logit"
TRANSFORM_WALD = "wald"


def marginal_positive_rate(theta, q0, q1):
    """p = P(Yhat = 1) implied by the misclassification model."""
    return (1.0 - theta) * (1.0 - q0) + theta * q1


# --------------------------------------------------------------------------
# Closed-form variance cores. These accept scalars or numpy arrays so the
# identity sweep can evaluate them over large random grids.
# --------------------------------------------------------------------------

def _rg_variance(theta, q0, q1, p, gamma1):
    kappa = q0 + q1 - 1.0
    bracket = p * (1.0 - p) + gamma1 * (
        (1.0 - theta) * q0 * (1.0 - q0) + theta * q1 * (1.0 - q1)
    )
    return (1.0 + gamma1) / gamma1 * bracket / kappa**2


def _ppi_variance(theta, q0, q1, p, gamma1):
    residual = (1.0 - theta) * (1.0 - q0) + theta * (1.0 - q1) - (theta - p) ** 2
    return (1.0 + gamma1) / gamma1 * (p * (1.0 - p) + gamma1 * residual)


def _ppi_plus_variance(theta, q0, q1, p, gamma1, lam):
    return (1.0 + gamma1) / gamma1 * (
        gamma1 * theta * (1.0 - theta)
        + lam**2 * (1.0 + gamma1) * p * (1.0 - p)
        - 2.0 * lam * gamma1 * theta * (q1 - p)
    )


def _optimal_lambda(theta, q0, q1, p, gamma1):
    return gamma1 * theta * (q1 - p) / ((1.0 + gamma1) * p * (1.0 - p))


def _eif_variance(theta, q0, q1, p, gamma1):
    kappa = q0 + q1 - 1.0
    inner = theta * (1.0 - theta) * kappa**2 + (gamma1 + 1.0) * (
        q1 * (1.0 - q1) * theta + q0 * (1.0 - q0) * (1.0 - theta)
    )
    return theta * (1.0 - theta) / (p * (1.0 - p)) * inner


def _mle_variance(theta, q0, q1, p, gamma1):
    kappa = q0 + q1 - 1.0
    c = kappa**2 * theta * (1.0 - theta)
    b = (1.0 - theta) * q0 * (1.0 - q0) + theta * q1 * (1.0 - q1)
    pq = p * (1.0 - p)
    return (1.0 + gamma1) * theta * (1.0 - theta) * (pq + gamma1 * b) / (pq + gamma1 * (c + b))


@dataclass(frozen=True)
class PopulationParams:
    """Population configuration (theta, q0, q1) with asymptotic ratio gamma1 = n/m."""

    theta: float
    q0: float
    q1: float
    gamma1: float

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if not (0.0 < self.q0 <= 1.0 and 0.0 < self.q1 <= 1.0):
            raise ValueError("q0 and q1 must lie in (0, 1]")
        if not self.gamma1 > 0.0:
            raise ValueError("gamma1 must be positive")
        if not 0.0 < self.p < 1.0:
            raise ValueError("implied P(Yhat=1) must lie in (0, 1)")

    @property
    def p(self) -> float:
        return marginal_positive_rate(self.theta, self.q0, self.q1)

    @property
    def kappa(self) -> float:
        return self.q0 + self.q1 - 1.0


@dataclass(frozen=True)
class VarianceEstimate:
    """sqrt(N)-scale variance ``v_n`` plus, when a sample size is known, the
    natural-scale standard error sqrt(v_n / N)."""

    v_n: float
    se: float | None = None
    source: str = CLOSED_FORM_PLUG_IN

    def __post_init__(self):
        if self.v_n < 0:
            raise ValueError("variance must be nonnegative")
        if self.se is not None and self.se < 0:
            raise ValueError("standard error must be nonnegative")


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    transform: str = TRANSFORM_LOGIT

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass
class InferenceResult:
    """One estimator's point estimate, uncertainty, and diagnostics."""

    estimator: str
    theta_hat: float
    variance: VarianceEstimate
    ci: ConfidenceInterval
    diagnostics: dict = field(default_factory=dict)


def rg_variance(params: PopulationParams) -> VarianceEstimate:
    """Delta-method variance of the misclassification inversion.

    The kappa**-2 factor is what makes weak judges so costly here.
    """
    if abs(params.kappa) < IDENTIFIABILITY_EPS:
        raise NearSingularCorrection("q0 + q1 - 1 too close to zero")
    return VarianceEstimate(float(_rg_variance(params.theta, params.q0, params.q1, params.p, params.gamma1)))


def ppi_variance(params: PopulationParams) -> VarianceEstimate:
    return VarianceEstimate(float(_ppi_variance(params.theta, params.q0, params.q1, params.p, params.gamma1)))


def ppi_plus_variance(params: PopulationParams, lam: float) -> VarianceEstimate:
    return VarianceEstimate(float(_ppi_plus_variance(params.theta, params.q0, params.q1, params.p, params.gamma1, lam)))


def optimal_lambda_population(params: PopulationParams) -> float:
    """Variance-minimizing weight gamma1 * theta * (q1 - p) / ((1+gamma1) p (1-p))."""
    return float(_optimal_lambda(params.theta, params.q0, params.q1, params.p, params.gamma1))


def eif_variance(params: PopulationParams) -> VarianceEstimate:
    pq = params.p * (1.0 - params.p)
    if pq == 0.0:
        raise DegenerateSurrogateDistribution("judge marginal is degenerate")
    return VarianceEstimate(float(_eif_variance(params.theta, params.q0, params.q1, params.p, params.gamma1)))


def mle_variance(params: PopulationParams) -> VarianceEstimate:
    """Closed form for the (1,1) entry of the inverse Fisher information.

    ``mle.expected_information`` assembles the full 3x3 matrix; numerically
    inverting it must agree with this expression.
    """
    if abs(params.kappa) < IDENTIFIABILITY_EPS:
        raise NearSingularCorrection("q0 + q1 - 1 too close to zero")
    return VarianceEstimate(float(_mle_variance(params.theta, params.q0, params.q1, params.p, params.gamma1)))


def ppi_finite_variance(theta: float, q0: float, q1: float, n: int, m: int) -> float:
    """Exact finite-sample variance of the residual-corrected estimator."""
    p = marginal_positive_rate(theta, q0, q1)
    residual = (1.0 - theta) * (1.0 - q0) + theta * (1.0 - q1) - (theta - p) ** 2
    return p * (1.0 - p) / n + residual / m


def naive_variance(p_hat: float, n: int) -> VarianceEstimate:
    """Binomial variance of the uncorrected test-set proportion.

    ``v_n`` here is on the sqrt(n) scale of the naive estimator's own
    sample; only ``se`` is comparable across estimators.
    """
    if n < 1:
        raise EmptyTestSet("naive variance needs at least one test observation")
    v = p_hat * (1.0 - p_hat)
    return VarianceEstimate(v_n=v, se=float(np.sqrt(v / n)))


def clamp_into_open_unit(theta_hat: float, total: int) -> float:
    """Half-count continuity correction into [1/(2N), 1 - 1/(2N)]."""
    eps = 0.5 / total
    return min(max(theta_hat, eps), 1.0 - eps)


def plug_in_variance(
    data: BinaryDataset,
    estimator: str,
    *,
    point: PointEstimate | None = None,
    lam: float | None = None,
    summary: CalibrationSummary | None = None,
) -> VarianceEstimate:
    """Evaluate the matching closed form at plug-in values.

    Conventions: theta_hat comes from the chosen estimator itself (clamped
    into the open unit interval by a half count before substitution), the
    judge-positive rate is pooled over all N judge labels, the error rates
    come from the calibration cells, and gamma1 = n/m.
    """
    if estimator == NAIVE:
        theta = point.theta_hat if point is not None else naive_estimate(data).theta_hat
        base = naive_variance(theta, data.n)
        return VarianceEstimate(v_n=base.se**2 * data.total, se=base.se)
    if estimator == MLE:
        from .mle import fit_mle  # local import keeps module layering acyclic

        fit = fit_mle(data)
        return VarianceEstimate(
            v_n=fit.info_inverse_11, se=float(np.sqrt(fit.info_inverse_11 / data.total))
        )

    if summary is None:
        summary = summarize_calibration(data)
    total = data.total
    rates = estimate_error_rates(summary)
    pooled_p = float(np.sum(data.cal_yhat) + np.sum(data.test_yhat)) / total

    if point is None:
        point = _point_estimate(data, estimator, lam)
    theta = clamp_into_open_unit(point.theta_hat, total)

    if estimator in (RG, PPI, PPI_PLUS):
        if data.n == 0:
            raise EmptyTestSet(f"{estimator} needs at least one test observation")
    gamma1 = data.n / data.m

    if estimator == RG:
        if not rates.identifiable:
            raise NearSingularCorrection("q0 + q1 - 1 too close to zero")
        v = _rg_variance(theta, rates.q0, rates.q1, pooled_p, gamma1)
    elif estimator == PPI:
        v = _ppi_variance(theta, rates.q0, rates.q1, pooled_p, gamma1)
    elif estimator == PPI_PLUS:
        if lam is None:
            lam = point.lam
        if lam is None:
            raise ValueError("power-tuned variance needs the realized lambda")
        v = _ppi_plus_variance(theta, rates.q0, rates.q1, pooled_p, gamma1, lam)
    elif estimator == EIF:
        if pooled_p <= 0.0 or pooled_p >= 1.0:
            raise DegenerateSurrogateDistribution("pooled judge labels are constant")
        v = _eif_variance(theta, rates.q0, rates.q1, pooled_p, gamma1)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    v = float(max(v, 0.0))
    return VarianceEstimate(v_n=v, se=float(np.sqrt(v / total)))


def _point_estimate(data: BinaryDataset, estimator: str, lam: float | None) -> PointEstimate:
    if estimator == NAIVE:
        return naive_estimate(data)
    if estimator == RG:
        rates = estimate_error_rates(summarize_calibration(data))
        return rogan_gladen_estimate(naive_estimate(data).theta_hat, rates)
    if estimator == PPI:
        return ppi_estimate(data)
    if estimator == PPI_PLUS:
        if lam is None:
            try:
                lam = optimal_lambda(data)
            except ConstantSurrogate:
                lam = 0.0
        return ppi_plus_estimate(data, lam)
    if estimator == EIF:
        return eif_binary_estimate(data)
    raise ValueError(f"unknown estimator {estimator!r}")


def logit_ci(theta_hat: float, variance: VarianceEstimate, level: float) -> ConfidenceInterval:
    """Wald interval on the log-odds scale, mapped back through expit.

    Keeps both endpoints inside [0, 1], which matters for boundary-adjacent
    estimates. The caller must clamp theta_hat into (0, 1) first; see
    ``clamp_into_open_unit``.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if variance.se is None:
        raise ValueError("interval construction needs a standard error")
    if variance.se == 0.0:
        return ConfidenceInterval(theta_hat, theta_hat, level, TRANSFORM_LOGIT)
    if not 0.0 < theta_hat < 1.0:
        raise ValueError("theta_hat must lie in (0, 1); clamp before calling")
    z = normal_quantile(0.5 + level / 2.0)
    center = logit(theta_hat)
    spread = z * variance.se / (theta_hat * (1.0 - theta_hat))
    return ConfidenceInterval(expit(center - spread), expit(center + spread), level, TRANSFORM_LOGIT)


def wald_ci(theta_hat: float, variance: VarianceEstimate, level: float) -> ConfidenceInterval:
    """Plain Wald interval on the natural scale, for unbounded outcomes."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if variance.se is None:
        raise ValueError("interval construction needs a standard error")
    z = normal_quantile(0.5 + level / 2.0)
    return ConfidenceInterval(theta_hat - z * variance.se, theta_hat + z * variance.se, level, TRANSFORM_WALD)


def estimate_all(
    data: BinaryDataset,
    estimators: tuple[str, ...] = BINARY_ESTIMATORS,
    level: float = 0.90,
) -> dict[str, InferenceResult | EstimationError]:
    """Run the requested estimators with plug-in intervals on one dataset.

    Failures are returned in-place as exception objects rather than raised,
    so a single degenerate estimator never aborts the others.
    """
    summary = summarize_calibration(data)
    results: dict[str, InferenceResult | EstimationError] = {}
    for name in estimators:
        try:
            results[name] = _estimate_one(data, summary, name, level)
        except EstimationError as err:
            results[name] = err
    return results


def _estimate_one(
    data: BinaryDataset, summary: CalibrationSummary, name: str, level: float
) -> InferenceResult:
    diagnostics: dict = {}
    if name == NAIVE:
        point = naive_estimate(data)
        variance = plug_in_variance(data, NAIVE, point=point, summary=summary)
    elif name == RG:
        rates = estimate_error_rates(summary)
        point = rogan_gladen_estimate(naive_estimate(data).theta_hat, rates)
        variance = plug_in_variance(data, RG, point=point, summary=summary)
        diagnostics = {"q0_hat": rates.q0, "q1_hat": rates.q1, "clamped": point.clamped}
    elif name == PPI:
        point = ppi_estimate(data)
        variance = plug_in_variance(data, PPI, point=point, summary=summary)
    elif name == PPI_PLUS:
        try:
            lam = optimal_lambda(data)
            lam_fallback = False
        except ConstantSurrogate:
            lam, lam_fallback = 0.0, True
        point = ppi_plus_estimate(data, lam)
        variance = plug_in_variance(data, PPI_PLUS, point=point, lam=lam, summary=summary)
        diagnostics = {"lambda": lam, "lambda_fallback": lam_fallback}
    elif name == EIF:
        point = eif_binary_estimate(data)
        variance = plug_in_variance(data, EIF, point=point, summary=summary)
        diagnostics = {"mu0_hat": summary.mu0_hat, "mu1_hat": summary.mu1_hat}
    elif name == MLE:
        from .mle import fit_mle

        fit = fit_mle(data)
        point = PointEstimate(fit.params.theta, MLE)
        variance = VarianceEstimate(
            v_n=fit.info_inverse_11, se=float(np.sqrt(fit.info_inverse_11 / data.total))
        )
        diagnostics = {
            "converged": fit.converged,
            "iterations": fit.iterations,
            "grad_norm": fit.grad_norm,
            "q0_hat": fit.params.q0,
            "q1_hat": fit.params.q1,
        }
        if fit.warnings:
            diagnostics["warnings"] = fit.warnings
    else:
        raise ValueError(f"unknown estimator {name!r}")

    center = clamp_into_open_unit(point.theta_hat, data.total)
    ci = logit_ci(center, variance, level)
    if point.lam is not None:
        diagnostics.setdefault("lambda", point.lam)
    return InferenceResult(name, point.theta_hat, variance, ci, diagnostics)
