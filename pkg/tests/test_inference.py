"""Variance formulas, plug-in standard errors, and interval construction.

The worked values were computed by hand from the closed forms at
theta = 0.5, q0 = q1 = 0.8, gamma1 = 9: the judge-positive rate is 0.5,
the inversion variance is 16.9/3.24, the residual-corrected variance is
(10/9)(0.25 + 1.8), and the efficient bound is 1.69.
"""

import math

import numpy as np
import pytest

from judgecal.datasets import BinaryDataset
from judgecal.errors import (
    DegenerateCalibrationClass,
    EstimationError,
    NearSingularCorrection,
)
from judgecal.inference import (
    ConfidenceInterval,
    PopulationParams,
    VarianceEstimate,
    clamp_into_open_unit,
    eif_variance,
    estimate_all,
    logit_ci,
    mle_variance,
    naive_variance,
    optimal_lambda_population,
    plug_in_variance,
    ppi_finite_variance,
    ppi_plus_variance,
    ppi_variance,
    rg_variance,
)
from judgecal.numerics import normal_cdf, normal_quantile
from judgecal.simulate import generate_binary_dataset, replicate_rng

PARAMS = PopulationParams(theta=0.5, q0=0.8, q1=0.8, gamma1=9.0)


def _grid(n, seed=5150):
    rng = np.random.default_rng(seed)
    return [
        PopulationParams(
            theta=rng.uniform(0.05, 0.95),
            q0=rng.uniform(0.55, 0.99),
            q1=rng.uniform(0.55, 0.99),
            gamma1=float(np.exp(rng.uniform(np.log(0.1), np.log(100.0)))),
        )
        for _ in range(n)
    ]


class TestPopulationParams:
    def test_marginal_rate(self):
        assert PARAMS.p == pytest.approx(0.5)
        assert PARAMS.kappa == pytest.approx(0.6)

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            PopulationParams(0.0, 0.8, 0.8, 1.0)
        with pytest.raises(ValueError):
            PopulationParams(0.5, 0.8, 0.8, 0.0)


class TestInversionVariance:
    def test_worked_example(self):
        assert rg_variance(PARAMS).v_n == pytest.approx(5.216049382716049, rel=1e-12)

    def test_perfect_judge_floor(self):
        params = PopulationParams(0.3, 1.0, 1.0, 4.0)
        assert rg_variance(params).v_n == pytest.approx((5 / 4) * 0.3 * 0.7, rel=1e-12)

    def test_weak_judge_amplification(self):
        params = PopulationParams(0.5, 0.6, 0.6, 9.0)
        assert rg_variance(params).v_n == pytest.approx(66.94444444444444, rel=1e-12)


class TestResidualCorrectionVariance:
    def test_worked_example(self):
        assert ppi_variance(PARAMS).v_n == pytest.approx(2.2777777777777777, rel=1e-12)

    def test_perfect_judge_floor(self):
        params = PopulationParams(0.3, 1.0, 1.0, 4.0)
        assert ppi_variance(params).v_n == pytest.approx((5 / 4) * 0.3 * 0.7, rel=1e-12)

    def test_finite_sample_form(self):
        assert ppi_finite_variance(0.5, 0.8, 0.8, 100, 100) == pytest.approx(0.0045, rel=1e-12)


class TestPowerTunedVariance:
    def test_zero_weight_is_calibration_only(self):
        assert ppi_plus_variance(PARAMS, 0.0).v_n == pytest.approx(10 * 0.25, rel=1e-12)

    def test_optimal_weight_value(self):
        lam = optimal_lambda_population(PARAMS)
        assert lam == pytest.approx(0.54, rel=1e-12)
        assert ppi_plus_variance(PARAMS, lam).v_n == pytest.approx(1.69, rel=1e-12)

    def test_convex_in_weight(self):
        lam = optimal_lambda_population(PARAMS)
        at_min = ppi_plus_variance(PARAMS, lam).v_n
        assert ppi_plus_variance(PARAMS, lam + 0.1).v_n > at_min
        assert ppi_plus_variance(PARAMS, lam - 0.1).v_n > at_min


class TestEfficientBound:
    def test_worked_example(self):
        assert eif_variance(PARAMS).v_n == pytest.approx(1.69, rel=1e-12)

    def test_matches_information_bound_on_grid(self):
        for params in _grid(1000):
            a = eif_variance(params).v_n
            b = mle_variance(params).v_n
            assert abs(a - b) <= 1e-10 * max(a, b)

    def test_matches_tuned_variance_on_grid(self):
        for params in _grid(1000, seed=99):
            a = eif_variance(params).v_n
            b = ppi_plus_variance(params, optimal_lambda_population(params)).v_n
            assert abs(a - b) <= 1e-10 * max(a, b)


class TestInformationBound:
    def test_worked_example(self):
        assert mle_variance(PARAMS).v_n == pytest.approx(1.69, rel=1e-12)

    def test_total_variance_substitution(self):
        # Replacing p(1-p) with its decomposition collapses the ratio.
        for params in _grid(200, seed=11):
            kappa2 = params.kappa**2
            c = kappa2 * params.theta * (1 - params.theta)
            b = (1 - params.theta) * params.q0 * (1 - params.q0) + params.theta * params.q1 * (
                1 - params.q1
            )
            pq = params.p * (1 - params.p)
            assert pq == pytest.approx(c + b, abs=1e-12)
            collapsed = params.theta * (1 - params.theta) / pq * (c + (1 + params.gamma1) * b)
            assert mle_variance(params).v_n == pytest.approx(collapsed, rel=1e-10)

    def test_near_singular_guard(self):
        with pytest.raises(NearSingularCorrection):
            mle_variance(PopulationParams(0.5, 0.7, 0.3 + 1e-9, 1.0))


class TestOrderings:
    def test_dominance_and_efficiency(self):
        for params in _grid(500, seed=8):
            v_rg = rg_variance(params).v_n
            v_ppi = ppi_variance(params).v_n
            v_eif = eif_variance(params).v_n
            assert v_ppi < v_rg
            assert v_eif <= v_ppi * (1 + 1e-12)
            for lam in (-0.2, 0.0, 0.3, 0.54, 1.0, 1.7):
                assert v_eif <= ppi_plus_variance(params, lam).v_n * (1 + 1e-12)

    def test_conditional_mean_difference_identity(self):
        for params in _grid(200, seed=21):
            theta, p = params.theta, params.p
            lhs = theta * params.q1 / p - theta * (1 - params.q1) / (1 - p)
            rhs = theta * (1 - theta) * params.kappa / (p * (1 - p))
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestNaiveVariance:
    def test_worked_examples(self):
        assert naive_variance(0.5, 100).se**2 == pytest.approx(0.0025, rel=1e-12)
        assert naive_variance(0.75, 4).se**2 == pytest.approx(0.046875, rel=1e-12)

    def test_boundary_degenerate(self):
        assert naive_variance(0.0, 50).se == 0.0
        assert naive_variance(1.0, 50).se == 0.0


class TestNormalQuantile:
    def test_reference_value(self):
        assert normal_quantile(0.95) == pytest.approx(1.6448536, abs=1e-6)

    def test_round_trip(self):
        for p in np.linspace(1e-6, 1 - 1e-6, 101):
            assert normal_cdf(normal_quantile(float(p))) == pytest.approx(p, abs=1e-12)

    def test_symmetry(self):
        for p in (0.6, 0.9, 0.975, 0.999):
            assert normal_quantile(p) == pytest.approx(-normal_quantile(1 - p), abs=1e-12)


class TestLogitInterval:
    def test_zero_se_degenerate(self):
        ci = logit_ci(0.3, VarianceEstimate(v_n=0.0, se=0.0), 0.9)
        assert (ci.lower, ci.upper) == (0.3, 0.3)

    def test_worked_example(self):
        ci = logit_ci(0.5, VarianceEstimate(v_n=1.0, se=0.029), 0.90)
        assert ci.lower == pytest.approx(0.4524434352216929, abs=1e-9)
        assert ci.upper == pytest.approx(0.5475565647783072, abs=1e-9)

    def test_reflection_equivariance(self):
        var = VarianceEstimate(v_n=1.0, se=0.05)
        a = logit_ci(0.3, var, 0.9)
        b = logit_ci(0.7, var, 0.9)
        assert a.lower == pytest.approx(1 - b.upper, abs=1e-12)
        assert a.upper == pytest.approx(1 - b.lower, abs=1e-12)

    def test_endpoints_inside_unit_interval_and_monotone_width(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            theta = rng.uniform(0.001, 0.999)
            ses = np.sort(rng.uniform(0.0, 0.6, size=4))
            widths = []
            for se in ses:
                ci = logit_ci(theta, VarianceEstimate(v_n=1.0, se=float(se)), 0.9)
                assert 0.0 <= ci.lower <= ci.upper <= 1.0
                widths.append(ci.width)
            assert all(w2 >= w1 - 1e-15 for w1, w2 in zip(widths, widths[1:]))

    def test_requires_interior_center(self):
        with pytest.raises(ValueError):
            logit_ci(1.0, VarianceEstimate(v_n=1.0, se=0.1), 0.9)

    def test_clamp_helper(self):
        assert clamp_into_open_unit(0.0, 100) == pytest.approx(0.005)
        assert clamp_into_open_unit(1.0, 100) == pytest.approx(0.995)
        assert clamp_into_open_unit(0.4, 100) == 0.4


class TestPlugInVariance:
    def test_efficient_se_concentrates(self):
        """Plug-in standard error of the one-step estimator is close to the
        closed-form value sqrt(1.69 / 2000) ~ 0.029 on matched data."""
        target = math.sqrt(1.69 / 2000)
        ses = []
        for b in range(200):
            data = generate_binary_dataset(0.5, 0.8, 0.8, 2000, 0.1, replicate_rng(77, b))
            ses.append(plug_in_variance(data, "eif").se)
        assert np.mean(ses) == pytest.approx(target, rel=0.05)

    def test_perfect_judge_relationships(self):
        # Balanced perfect-judge data: the inversion and the residual
        # correction have identical plug-in variances, and the one-step
        # variance is smaller by exactly the test-fraction factor.
        data = BinaryDataset([1, 0] * 5, [1, 0] * 5, [1, 0] * 5)
        v_rg = plug_in_variance(data, "rg")
        v_ppi = plug_in_variance(data, "ppi")
        v_eif = plug_in_variance(data, "eif")
        gamma = data.n / data.m
        assert v_rg.v_n == pytest.approx(v_ppi.v_n, abs=1e-12)
        assert v_ppi.v_n == pytest.approx(v_eif.v_n * (1 + gamma) / gamma, abs=1e-12)

    def test_weak_judge_inflation(self):
        # Deterministic dataset with plug-in rates exactly 0.6/0.6.
        cal_y = [1] * 100 + [0] * 100
        cal_yhat = [1] * 60 + [0] * 40 + [0] * 60 + [1] * 40
        test_yhat = [1] * 900 + [0] * 900
        data = BinaryDataset(cal_y, cal_yhat, test_yhat)
        se_rg = plug_in_variance(data, "rg").se
        se_eif = plug_in_variance(data, "eif").se
        assert se_rg / se_eif > 3.0

    def test_propagates_degenerate_class(self):
        data = BinaryDataset([1, 1, 1], [1, 0, 1], [1, 0])
        with pytest.raises(DegenerateCalibrationClass):
            plug_in_variance(data, "ppi")


class TestEstimateAll:
    def test_failures_returned_in_place(self):
        data = BinaryDataset([1, 1, 1], [1, 0, 1], [1, 0, 1, 1])
        results = estimate_all(data)
        assert results["naive"].theta_hat == pytest.approx(0.75)
        for name in ("rg", "ppi", "ppi++", "mle", "eif"):
            assert isinstance(results[name], EstimationError), name

    def test_interval_center_is_clamped_point(self):
        data = generate_binary_dataset(0.5, 0.8, 0.7, 400, 0.25, replicate_rng(13, 0))
        results = estimate_all(data)
        for name, res in results.items():
            assert isinstance(res.ci, ConfidenceInterval), name
            assert res.ci.lower <= clamp_into_open_unit(res.theta_hat, data.total) <= res.ci.upper
