"""The identity sweep itself: it must pass on correct formulas and flag
an injected perturbation."""

import numpy as np

from judgecal.identities import relative_gap, run_identity_check, sample_parameter_grid
from judgecal.inference import _eif_variance, _mle_variance, marginal_positive_rate


class TestIdentitySweep:
    def test_default_sweep_passes(self):
        report = run_identity_check(points=2000, seed=1)
        assert report.passed
        names = {check.name for check in report.checks}
        assert "efficient_bound_triple_identity" in names
        assert "residual_correction_dominates_inversion" in names

    def test_sweep_is_deterministic(self):
        a = run_identity_check(points=500, seed=3)
        b = run_identity_check(points=500, seed=3)
        assert [c.max_deviation for c in a.checks] == [c.max_deviation for c in b.checks]

    def test_perturbation_is_detected(self):
        grid = sample_parameter_grid(1000, seed=2)
        p = marginal_positive_rate(grid["theta"], grid["q0"], grid["q1"])
        v_eif = _eif_variance(grid["theta"], grid["q0"], grid["q1"], p, grid["gamma1"])
        v_mle = _mle_variance(grid["theta"], grid["q0"], grid["q1"], p, grid["gamma1"])
        clean = float(relative_gap(v_eif, v_mle).max())
        poisoned = float(relative_gap(v_eif + 1e-6, v_mle).max())
        assert clean <= 1e-10
        assert poisoned > 1e-10

    def test_relative_gap_safe_at_zero(self):
        assert relative_gap(np.zeros(3), np.zeros(3)).max() == 0.0
