"""Calibration regression and debiased mean estimation for real-valued outcomes.

The judge emits ordinal or continuous scores; the target is the mean of the
human outcome. A calibration model approximates E[Y | score], plugged into
the one-step estimator: average the imputed values over all N units, then
add the inverse-probability-weighted calibration residuals. Uncertainty
comes from the empirical variance of the per-unit influence contributions,
since no closed form exists without parametric assumptions on Y.
"""

from dataclasses import dataclass, field

import numpy as np

from .datasets import ContinuousDataset
from .errors import ConstantSurrogate, EmptyTestSet, EstimationError, RankDeficient, UnseenLevel
from .inference import (
    EMPIRICAL_IF,
    InferenceResult,
    VarianceEstimate,
    wald_ci,
)

CATEGORICAL = "categorical"
LINEAR = "linear"
SPLINE = "spline"
MU_FAMILIES = (CATEGORICAL, LINEAR, SPLINE)

#: Ridge weights for the spline curvature penalty, searched by GCV.
_PENALTY_GRID = np.logspace(-8.0, 8.0, 20)
_MAX_INTERIOR_KNOTS = 8


@dataclass(frozen=True)
class CalibrationModel:
    """Fitted approximation of E[Y | judge score].

    Exactly one of the parameter blocks is populated, depending on family:
    per-level means, an (intercept, slope) pair, or a natural cubic spline
    basis with its coefficients and the GCV-selected penalty.
    """

    family: str
    level_means: dict = field(default_factory=dict)
    coefficients: np.ndarray | None = None
    knots: np.ndarray | None = None
    penalty: float | None = None
    residual_variance: float = 0.0

    def predict(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.family == CATEGORICAL:
            out = np.full(values.shape, np.nan)
            for key, mean in self.level_means.items():
                out[values == key] = mean
            missing = np.isnan(out)
            if missing.any():
                raise UnseenLevel(float(values[missing][0]))
            return out
        if self.family == LINEAR:
            a, b = self.coefficients
            return a + b * values
        basis = _natural_cubic_basis(values, self.knots)
        return basis @ self.coefficients


def fit_calibration_model(
    data: ContinuousDataset, family: str, levels=None
) -> CalibrationModel:
    """Least-squares fit of E[Y | score] within the requested family.

    Categorical takes per-level sample means; linear is ordinary least
    squares; spline is a penalized natural cubic fit with knots at the
    calibration-score deciles (at most 8 interior) and a second-difference
    curvature penalty whose weight is chosen by generalized cross-validation
    over a fixed 20-point log grid.
    """
    if data.m < 2:
        raise RankDeficient("calibration regression needs at least two pairs")
    x = data.cal_yhat
    y = data.cal_y

    if family == CATEGORICAL:
        return _fit_categorical(x, y, levels)
    if family == LINEAR:
        return _fit_linear(x, y)
    if family == SPLINE:
        return _fit_spline(x, y)
    raise ValueError(f"unknown calibration family {family!r}")


def _fit_categorical(x, y, levels) -> CalibrationModel:
    if levels is not None:
        keys = list(levels)
    elif np.all(np.equal(np.mod(x, 1.0), 0.0)):
        keys = None  # canonicalize observed values to ints below
    else:
        raise ValueError("non-integral scores need explicit levels for a categorical fit")
    means: dict = {}
    residual = np.empty_like(y)
    if keys is None:
        observed = np.unique(x.astype(np.int64))
        for lvl in observed:
            mask = x == lvl
            means[int(lvl)] = float(np.mean(y[mask]))
            residual[mask] = y[mask] - means[int(lvl)]
    else:
        for lvl in keys:
            mask = x == lvl
            if not mask.any():
                raise UnseenLevel(lvl, f"declared level {lvl!r} has no calibration rows")
            means[lvl] = float(np.mean(y[mask]))
            residual[mask] = y[mask] - means[lvl]
    return CalibrationModel(
        family=CATEGORICAL,
        level_means=means,
        residual_variance=float(np.mean(residual**2)),
    )


def _fit_linear(x, y) -> CalibrationModel:
    xc = x - np.mean(x)
    denom = float(np.sum(xc**2))
    if denom == 0.0:
        raise RankDeficient("judge scores are constant; no linear fit exists")
    slope = float(np.sum(xc * y)) / denom
    intercept = float(np.mean(y)) - slope * float(np.mean(x))
    fitted = intercept + slope * x
    return CalibrationModel(
        family=LINEAR,
        coefficients=np.array([intercept, slope]),
        residual_variance=float(np.mean((y - fitted) ** 2)),
    )


def _spline_knots(x: np.ndarray) -> np.ndarray:
    if np.unique(x).size < 3:
        raise RankDeficient("spline fit needs at least three distinct score values")
    # "nearest" keeps knots on observed score values.
    interior = np.unique(np.quantile(x, np.linspace(0.1, 0.9, 9), method="nearest"))
    if interior.size > _MAX_INTERIOR_KNOTS:
        keep = np.linspace(0, interior.size - 1, _MAX_INTERIOR_KNOTS).round().astype(int)
        interior = interior[np.unique(keep)]
    return np.unique(np.concatenate([[x.min()], interior, [x.max()]]))


def _natural_cubic_basis(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Truncated-power natural cubic basis: linear tails beyond the boundary
    knots, dimension equal to the number of knots."""
    x = np.asarray(x, dtype=np.float64)
    k = knots.size
    last = knots[-1]
    second_last = knots[-2]

    def d(idx):
        return (
            np.maximum(x - knots[idx], 0.0) ** 3 - np.maximum(x - last, 0.0) ** 3
        ) / (last - knots[idx])

    cols = [np.ones_like(x), x]
    d_last = d(k - 2)
    for j in range(k - 2):
        cols.append(d(j) - d_last)
    return np.column_stack(cols)


def _curvature_rows(knots: np.ndarray) -> np.ndarray:
    """Divided second differences of the fitted values at the knots.

    Their null space is exactly the affine functions, so the penalty shrinks
    toward a straight line and the fit stays shift and scale equivariant.
    """
    k = knots.size
    rows = np.zeros((k - 2, k))
    for i in range(1, k - 1):
        h0 = knots[i] - knots[i - 1]
        h1 = knots[i + 1] - knots[i]
        rows[i - 1, i - 1] = 2.0 / (h0 * (h0 + h1))
        rows[i - 1, i] = -2.0 / (h0 * h1)
        rows[i - 1, i + 1] = 2.0 / (h1 * (h0 + h1))
    return rows


def _fit_spline(x, y) -> CalibrationModel:
    knots = _spline_knots(x)
    basis = _natural_cubic_basis(x, knots)
    basis_at_knots = _natural_cubic_basis(knots, knots)
    penalty_root = _curvature_rows(knots) @ basis_at_knots
    gram = basis.T @ basis
    penalty_mat = penalty_root.T @ penalty_root
    moment = basis.T @ y
    m = y.size

    best = None
    for lam in _PENALTY_GRID:
        try:
            system = gram + lam * penalty_mat
            coef = np.linalg.solve(system, moment)
            hat_trace = float(np.trace(np.linalg.solve(system, gram)))
        except np.linalg.LinAlgError:
            continue
        if hat_trace >= m:
            continue
        rss = float(np.sum((y - basis @ coef) ** 2))
        gcv = m * rss / (m - hat_trace) ** 2
        if best is None or gcv < best[0]:
            best = (gcv, lam, coef, rss)
    if best is None:
        raise RankDeficient("spline system is singular at every penalty weight")
    _, lam, coef, rss = best
    return CalibrationModel(
        family=SPLINE,
        coefficients=coef,
        knots=knots,
        penalty=float(lam),
        residual_variance=rss / m,
    )


def eif_continuous_estimate(
    data: ContinuousDataset, model: CalibrationModel, level: float = 0.90
) -> InferenceResult:
    """One-step debiased mean with empirical influence-function variance.

    The labeling probability defaults to the realized fraction m/N; pass
    ``labeled_probability`` on the dataset when the design probability is
    known. The interval is Wald on the natural scale since the outcome is
    unbounded.
    """
    mu_cal = model.predict(data.cal_yhat)
    mu_test = model.predict(data.test_yhat)
    mu_all = np.concatenate([mu_cal, mu_test])
    residual = data.cal_y - mu_cal
    n_total = data.total
    if data.labeled_probability is None:
        pi_hat = data.m / n_total
        theta = float(np.mean(mu_all)) + float(np.sum(residual)) / data.m
    else:
        pi_hat = data.labeled_probability
        theta = float(np.mean(mu_all)) + float(np.sum(residual)) / (n_total * pi_hat)

    influence = mu_all - theta
    influence[: data.m] += residual / pi_hat
    v_n = float(np.var(influence, ddof=1)) if n_total > 1 else 0.0
    variance = VarianceEstimate(v_n=v_n, se=float(np.sqrt(v_n / n_total)), source=EMPIRICAL_IF)
    ci = wald_ci(theta, variance, level)
    return InferenceResult(
        estimator=f"eif_{model.family}",
        theta_hat=theta,
        variance=variance,
        ci=ci,
        diagnostics={"labeled_probability": pi_hat, "mu_family": model.family},
    )


def naive_continuous_estimate(data: ContinuousDataset, level: float = 0.90) -> InferenceResult:
    """Mean judge score over the test set; ignores the scale of Y entirely."""
    if data.n == 0:
        raise EmptyTestSet("naive estimator needs at least one test observation")
    theta = float(np.mean(data.test_yhat))
    v = float(np.var(data.test_yhat, ddof=1)) if data.n > 1 else 0.0
    variance = VarianceEstimate(v_n=v, se=float(np.sqrt(v / data.n)), source=EMPIRICAL_IF)
    return InferenceResult("naive", theta, variance, wald_ci(theta, variance, level))


def ppi_continuous_estimate(data: ContinuousDataset, level: float = 0.90) -> InferenceResult:
    """Test-set score mean corrected by the mean calibration residual."""
    if data.n == 0:
        raise EmptyTestSet("residual correction needs at least one test observation")
    delta = data.cal_yhat - data.cal_y
    theta = float(np.mean(data.test_yhat)) - float(np.mean(delta))
    v_test = float(np.var(data.test_yhat, ddof=1)) if data.n > 1 else 0.0
    v_delta = float(np.var(delta, ddof=1)) if data.m > 1 else 0.0
    se = float(np.sqrt(v_test / data.n + v_delta / data.m))
    variance = VarianceEstimate(v_n=se**2 * data.total, se=se, source=EMPIRICAL_IF)
    return InferenceResult("ppi", theta, variance, wald_ci(theta, variance, level))


def continuous_optimal_lambda(data: ContinuousDataset) -> float:
    """(n/N) * Cov(Y, score) / Var(score), moments taken on the calibration set."""
    if data.m < 2:
        raise ConstantSurrogate("need at least two calibration pairs for sample moments")
    var = float(np.var(data.cal_yhat, ddof=1))
    if var == 0.0:
        raise ConstantSurrogate("judge scores are constant on the calibration set")
    cov = float(np.cov(data.cal_y, data.cal_yhat, ddof=1)[0, 1])
    return (data.n / data.total) * cov / var


def ppi_plus_continuous_estimate(
    data: ContinuousDataset, level: float = 0.90, lam: float | None = None
) -> InferenceResult:
    """Power-tuned residual correction for continuous outcomes.

    The variance plugs sample moments into the exact finite-sample form,
    with the score variance pooled over all N units for stability.
    """
    if data.n == 0:
        raise EmptyTestSet("residual correction needs at least one test observation")
    lam_fallback = False
    if lam is None:
        try:
            lam = continuous_optimal_lambda(data)
        except ConstantSurrogate:
            lam, lam_fallback = 0.0, True
    theta = float(np.mean(data.cal_y)) + lam * (
        float(np.mean(data.test_yhat)) - float(np.mean(data.cal_yhat))
    )
    var_y = float(np.var(data.cal_y, ddof=1)) if data.m > 1 else 0.0
    pooled = data.all_yhat()
    var_s = float(np.var(pooled, ddof=1)) if data.total > 1 else 0.0
    cov = (
        float(np.cov(data.cal_y, data.cal_yhat, ddof=1)[0, 1]) if data.m > 1 else 0.0
    )
    v = var_y / data.m + lam**2 * var_s * (1.0 / data.n + 1.0 / data.m) - 2.0 * lam * cov / data.m
    v = max(v, 0.0)
    se = float(np.sqrt(v))
    variance = VarianceEstimate(v_n=v * data.total, se=se, source=EMPIRICAL_IF)
    return InferenceResult(
        "ppi++", theta, variance, wald_ci(theta, variance, level),
        diagnostics={"lambda": lam, "lambda_fallback": lam_fallback},
    )


def estimate_all_continuous(
    data: ContinuousDataset,
    estimators: tuple[str, ...],
    level: float = 0.90,
) -> dict[str, InferenceResult | EstimationError]:
    """Continuous counterpart of ``inference.estimate_all``.

    Estimator keys: ``naive``, ``ppi``, ``ppi++``, and ``eif_<family>`` for
    each calibration-regression family.
    """
    results: dict[str, InferenceResult | EstimationError] = {}
    for name in estimators:
        try:
            if name == "naive":
                results[name] = naive_continuous_estimate(data, level)
            elif name == "ppi":
                results[name] = ppi_continuous_estimate(data, level)
            elif name == "ppi++":
                results[name] = ppi_plus_continuous_estimate(data, level)
            elif name.startswith("eif_"):
                family = name.removeprefix("eif_")
                if family not in MU_FAMILIES:
                    raise ValueError(f"unknown calibration family {family!r}")
                model = fit_calibration_model(data, family)
                results[name] = eif_continuous_estimate(data, model, level)
            else:
                raise ValueError(f"unknown estimator {name!r}")
        except EstimationError as err:
            results[name] = err
    return results
