"""Joint maximum likelihood for (theta, q0, q1) over test + calibration data.

The log-likelihood depends on the data only through eight counts: the test
positives/negatives and the four calibration cells. Fitting runs a damped
Newton iteration on the logit scale using the expected (Fisher) information
as the step matrix, which is positive definite for interior parameters and
therefore always yields an ascent direction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .datasets import BinaryDataset, summarize_calibration
from .errors import DegenerateCalibrationClass, EstimationError, SingularInformation
from .estimators import estimate_error_rates, eif_binary_estimate, rogan_gladen_estimate
from .inference import marginal_positive_rate
from .numerics import expit, logit

#: Interior clamp on the probability scale; parameters never reach 0 or 1.
INTERIOR_EPS = 1e-8
_S_MAX = logit(1.0 - INTERIOR_EPS)

NON_IDENTIFIABLE_BRANCH = "non_identifiable_branch"


@dataclass(frozen=True)
class MleParams:
    theta: float
    q0: float
    q1: float

    def __post_init__(self):
        for name in ("theta", "q0", "q1"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie strictly inside (0, 1), got {value}")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.q0, self.q1])


@dataclass(frozen=True)
class NewtonConfig:
    grad_tol: float = 1e-10
    max_iterations: int = 100
    max_step_halvings: int = 30


@dataclass(frozen=True)
class MleFitResult:
    params: MleParams
    loglik: float
    grad_norm: float
    iterations: int
    converged: bool
    #: Variance of theta_hat on the sqrt(N) scale, from the expected information.
    info_inverse_11: float
    warnings: tuple[str, ...] = ()
    #: One-step estimate recorded as a fallback when the fit did not converge.
    fallback_estimate: float | None = None


@dataclass(frozen=True)
class _Counts:
    n1: int
    n0: int
    x11: int
    x10: int
    x01: int
    x00: int

    @property
    def m1(self) -> int:
        return self.x11 + self.x10

    @property
    def m0(self) -> int:
        return self.x01 + self.x00

    @property
    def m(self) -> int:
        return self.m1 + self.m0

    @property
    def n(self) -> int:
        return self.n1 + self.n0

    @property
    def total(self) -> int:
        return self.m + self.n


def _counts(data: BinaryDataset) -> _Counts:
    s = summarize_calibration(data)
    n1 = int(np.sum(data.test_yhat))
    return _Counts(n1=n1, n0=data.n - n1, x11=s.x11, x10=s.x10, x01=s.x01, x00=s.x00)


def _log_likelihood(c: _Counts, theta: float, q0: float, q1: float) -> float:
    p = marginal_positive_rate(theta, q0, q1)
    value = c.m1 * math.log(theta) + c.m0 * math.log(1.0 - theta)
    value += c.x00 * math.log(q0) + c.x01 * math.log(1.0 - q0)
    value += c.x11 * math.log(q1) + c.x10 * math.log(1.0 - q1)
    if c.n:
        value += c.n1 * math.log(p) + c.n0 * math.log(1.0 - p)
    return value


def _score(c: _Counts, theta: float, q0: float, q1: float) -> np.ndarray:
    p = marginal_positive_rate(theta, q0, q1)
    # The test part is (n1 - n p) / (p (1-p)) times the gradient of p.
    test_common = c.n1 / p - c.n0 / (1.0 - p) if c.n else 0.0
    kappa = q0 + q1 - 1.0
    d_theta = test_common * kappa + c.m1 / theta - c.m0 / (1.0 - theta)
    d_q0 = -test_common * (1.0 - theta) + c.x00 / q0 - c.x01 / (1.0 - q0)
    d_q1 = test_common * theta + c.x11 / q1 - c.x10 / (1.0 - q1)
    return np.array([d_theta, d_q0, d_q1])


def _information_pieces(theta: float, q0: float, q1: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-observation information of a test draw and of a calibration draw."""
    p = marginal_positive_rate(theta, q0, q1)
    grad_p = np.array([q0 + q1 - 1.0, -(1.0 - theta), theta])
    info_test = np.outer(grad_p, grad_p) / (p * (1.0 - p))
    info_cal = np.diag(
        [
            1.0 / (theta * (1.0 - theta)),
            (1.0 - theta) / (q0 * (1.0 - q0)),
            theta / (q1 * (1.0 - q1)),
        ]
    )
    return info_test, info_cal


def log_likelihood(params: MleParams, data: BinaryDataset) -> float:
    """Joint log-likelihood over test (judge only) and calibration (paired) rows."""
    return _log_likelihood(_counts(data), params.theta, params.q0, params.q1)


def score(params: MleParams, data: BinaryDataset) -> np.ndarray:
    """Analytic gradient of the log-likelihood in (theta, q0, q1)."""
    return _score(_counts(data), params.theta, params.q0, params.q1)


def expected_information(params: MleParams, gamma1: float) -> np.ndarray:
    """Limiting per-observation Fisher information at test/calibration ratio gamma1.

    The calibration block is diagonal; the test block is the rank-one outer
    product of the gradient of p, scaled by the Bernoulli information.
    """
    if gamma1 < 0:
        raise ValueError("gamma1 must be nonnegative")
    info_test, info_cal = _information_pieces(params.theta, params.q0, params.q1)
    w = gamma1 / (1.0 + gamma1)
    return w * info_test + (1.0 - w) * info_cal


def observed_information(params: MleParams, data: BinaryDataset) -> np.ndarray:
    """Negative Hessian of the log-likelihood at the given parameters.

    Exposed for diagnostics only; reported variances use the expected form.
    """
    c = _counts(data)
    theta, q0, q1 = params.theta, params.q0, params.q1
    p = marginal_positive_rate(theta, q0, q1)
    grad_p = np.array([q0 + q1 - 1.0, -(1.0 - theta), theta])
    hess_p = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    test_common = c.n1 / p - c.n0 / (1.0 - p) if c.n else 0.0
    curvature = -c.n1 / p**2 - c.n0 / (1.0 - p) ** 2 if c.n else 0.0
    hessian = curvature * np.outer(grad_p, grad_p) + test_common * hess_p
    hessian += np.diag(
        [
            -c.m1 / theta**2 - c.m0 / (1.0 - theta) ** 2,
            -c.x00 / q0**2 - c.x01 / (1.0 - q0) ** 2,
            -c.x11 / q1**2 - c.x10 / (1.0 - q1) ** 2,
        ]
    )
    return -hessian


def _sample_information(c: _Counts, theta: float, q0: float, q1: float) -> np.ndarray:
    info_test, info_cal = _information_pieces(theta, q0, q1)
    return c.n * info_test + c.m * info_cal


def _initial_values(c: _Counts, data: BinaryDataset) -> tuple[np.ndarray, tuple[str, ...]]:
    summary = summarize_calibration(data)
    rates = estimate_error_rates(summary)
    warnings: tuple[str, ...] = ()
    if rates.kappa <= 0.0:
        # The likelihood has a label-swap twin mode; we stay on the branch
        # the plug-in rates point at and let the caller know.
        warnings = (NON_IDENTIFIABLE_BRANCH,)
    if c.n >= 1 and rates.identifiable:
        p_hat = c.n1 / c.n
        theta0 = rogan_gladen_estimate(p_hat, rates).theta_hat
    else:
        theta0 = summary.y_bar
    eps0 = max(0.5 / c.total, 1e-6)
    start = np.clip([theta0, rates.q0, rates.q1], eps0, 1.0 - eps0)
    return start, warnings


def fit_mle(data: BinaryDataset, config: NewtonConfig | None = None) -> MleFitResult:
    """Maximize the joint likelihood by damped Newton steps on the logit scale.

    Steps are halved (up to ``max_step_halvings``) whenever the log-likelihood
    fails to improve beyond rounding noise; near the optimum the true gain per
    step is far below float resolution, so a small slack keeps the iteration
    moving until the gradient criterion decides convergence. On failure to
    converge the best iterate is returned with ``converged=False`` and the
    one-step estimate recorded as a fallback.
    """
    cfg = config or NewtonConfig()
    c = _counts(data)
    if c.m1 == 0:
        raise DegenerateCalibrationClass(1)
    if c.m0 == 0:
        raise DegenerateCalibrationClass(0)

    start, warnings = _initial_values(c, data)
    s = np.clip([logit(v) for v in start], -_S_MAX, _S_MAX)
    eta = np.array([expit(v) for v in s])
    ll = _log_likelihood(c, *eta)

    converged = False
    iterations = 0
    grad = _score(c, *eta)
    for iterations in range(1, cfg.max_iterations + 1):
        grad = _score(c, *eta)
        if float(np.linalg.norm(grad)) <= cfg.grad_tol:
            converged = True
            iterations -= 1
            break
        jac = eta * (1.0 - eta)
        grad_logit = grad * jac
        info_logit = _sample_information(c, *eta) * np.outer(jac, jac)
        try:
            direction = np.linalg.solve(info_logit, grad_logit)
        except np.linalg.LinAlgError:
            direction = grad_logit
        slack = 1e-9 * (1.0 + abs(ll))
        step = 1.0
        accepted = False
        for _ in range(cfg.max_step_halvings + 1):
            s_new = np.clip(s + step * direction, -_S_MAX, _S_MAX)
            eta_new = np.array([expit(v) for v in s_new])
            ll_new = _log_likelihood(c, *eta_new)
            if ll_new >= ll - slack:
                s, eta, ll = s_new, eta_new, ll_new
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    else:
        iterations = cfg.max_iterations

    grad = _score(c, *eta)
    grad_norm = float(np.linalg.norm(grad))
    if grad_norm <= cfg.grad_tol:
        converged = True

    params = MleParams(float(eta[0]), float(eta[1]), float(eta[2]))
    try:
        info_inv = np.linalg.inv(_sample_information(c, *eta))
    except np.linalg.LinAlgError as err:
        raise SingularInformation(str(err)) from err
    info_inverse_11 = float(info_inv[0, 0]) * c.total

    fallback = None
    if not converged:
        try:
            fallback = eif_binary_estimate(data).theta_hat
        except EstimationError:
            fallback = None
    return MleFitResult(
        params=params,
        loglik=ll,
        grad_norm=grad_norm,
        iterations=iterations,
        converged=converged,
        info_inverse_11=info_inverse_11,
        warnings=warnings,
        fallback_estimate=fallback,
    )
