"""Cross-formula consistency checks over random parameter grids.

These sweeps guard the variance algebra: the efficient bound must match
both the inverse Fisher information and the optimally tuned power
correction, the residual-corrected variance must dominate the
misclassification inversion, and two scalar identities must hold to
near machine precision. A formula regression anywhere shows up here.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import mle
from .inference import (
    _eif_variance,
    _mle_variance,
    _optimal_lambda,
    _ppi_plus_variance,
    _ppi_variance,
    _rg_variance,
    marginal_positive_rate,
)

TRIPLE_TOL = 1e-10
SCALAR_TOL = 1e-12
MATRIX_TOL = 1e-9


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    max_deviation: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class IdentityCheckReport:
    checks: tuple[IdentityCheck, ...]
    points: int
    seed: int
    elapsed_seconds: float

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


def relative_gap(a, b):
    """Elementwise |a - b| / max(|a|, |b|), safe at zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(a), np.abs(b))
    scale = np.where(scale == 0.0, 1.0, scale)
    return np.abs(a - b) / scale


def sample_parameter_grid(points: int, seed: int) -> dict[str, np.ndarray]:
    """Random identifiable configurations: theta in (0.05, 0.95), error rates
    in (0.55, 0.99), size ratio log-uniform over (0.1, 100)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed,))))
    theta = rng.uniform(0.05, 0.95, points)
    q0 = rng.uniform(0.55, 0.99, points)
    q1 = rng.uniform(0.55, 0.99, points)
    gamma1 = np.exp(rng.uniform(np.log(0.1), np.log(100.0), points))
    return {"theta": theta, "q0": q0, "q1": q1, "gamma1": gamma1}


def run_identity_check(points: int = 10_000, seed: int = 20_240_817, matrix_points: int | None = None) -> IdentityCheckReport:
    """Sweep the variance identities over ``points`` random configurations.

    ``matrix_points`` caps how many points get the (slower) numeric 3x3
    Fisher inversion; defaults to all of them.
    """
    started = time.perf_counter()
    grid = sample_parameter_grid(points, seed)
    theta, q0, q1, gamma1 = grid["theta"], grid["q0"], grid["q1"], grid["gamma1"]
    p = marginal_positive_rate(theta, q0, q1)

    v_rg = _rg_variance(theta, q0, q1, p, gamma1)
    v_ppi = _ppi_variance(theta, q0, q1, p, gamma1)
    v_eif = _eif_variance(theta, q0, q1, p, gamma1)
    v_mle = _mle_variance(theta, q0, q1, p, gamma1)
    lam_star = _optimal_lambda(theta, q0, q1, p, gamma1)
    v_tuned = _ppi_plus_variance(theta, q0, q1, p, gamma1, lam_star)

    checks = []

    triple = max(
        float(relative_gap(v_eif, v_mle).max()),
        float(relative_gap(v_eif, v_tuned).max()),
    )
    checks.append(IdentityCheck("efficient_bound_triple_identity", triple, TRIPLE_TOL, triple <= TRIPLE_TOL))

    # Strict dominance away from a perfect judge.
    min_margin = float((v_rg - v_ppi).min())
    checks.append(IdentityCheck("residual_correction_dominates_inversion", -min_margin, 0.0, min_margin > 0.0))

    # Injected perfect-judge points: dominance collapses to equality.
    theta_eq = np.linspace(0.05, 0.95, 19)
    ones = np.ones_like(theta_eq)
    p_eq = marginal_positive_rate(theta_eq, ones, ones)
    eq_gap = float(
        relative_gap(
            _rg_variance(theta_eq, ones, ones, p_eq, 4.0),
            _ppi_variance(theta_eq, ones, ones, p_eq, 4.0),
        ).max()
    )
    checks.append(IdentityCheck("perfect_judge_equality", eq_gap, SCALAR_TOL, eq_gap <= SCALAR_TOL))

    # Law of total variance for the judge label.
    total_var_gap = float(
        np.abs(
            p * (1.0 - p)
            - (q0 + q1 - 1.0) ** 2 * theta * (1.0 - theta)
            - (1.0 - theta) * q0 * (1.0 - q0)
            - theta * q1 * (1.0 - q1)
        ).max()
    )
    checks.append(IdentityCheck("judge_label_total_variance", total_var_gap, SCALAR_TOL, total_var_gap <= SCALAR_TOL))

    # Difference of conditional means equals the regression slope form.
    mu_diff_gap = float(
        np.abs(
            theta * q1 / p
            - theta * (1.0 - q1) / (1.0 - p)
            - theta * (1.0 - theta) * (q0 + q1 - 1.0) / (p * (1.0 - p))
        ).max()
    )
    checks.append(IdentityCheck("conditional_mean_difference", mu_diff_gap, SCALAR_TOL, mu_diff_gap <= SCALAR_TOL))

    # Closed form versus numeric inversion of the assembled information matrix.
    k = points if matrix_points is None else min(points, matrix_points)
    worst = 0.0
    for i in range(k):
        params = mle.MleParams(float(theta[i]), float(q0[i]), float(q1[i]))
        info = mle.expected_information(params, float(gamma1[i]))
        numeric = float(np.linalg.inv(info)[0, 0])
        worst = max(worst, float(relative_gap(numeric, float(v_mle[i]))))
    checks.append(IdentityCheck("information_inverse_closed_form", worst, MATRIX_TOL, worst <= MATRIX_TOL))

    elapsed = time.perf_counter() - started
    return IdentityCheckReport(tuple(checks), points, seed, elapsed)
