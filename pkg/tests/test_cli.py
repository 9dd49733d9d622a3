"""Command-line surface: exit codes, determinism, output files, figures."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from judgecal.cli import main

HEADER = "id,y,y_hat,judge,pair\n"


def _write_perfect_file(path, m=20, n=40):
    # Balanced labels so calibration and test means coincide exactly.
    lines = [HEADER]
    for i in range(m):
        lines.append(f"c{i},{i % 2},{i % 2},judge,pair\n")
    for i in range(n):
        lines.append(f"t{i},,{i % 2},judge,pair\n")
    path.write_text("".join(lines), encoding="utf-8")
    return path


def _write_weak_judge_file(path):
    """Judge-quality profile shaped like a weak real judge: prevalence 0.451,
    specificity near 0.5, sensitivity near 0.64, 494 rows, 10% labeled."""
    rows = []
    m1, m0 = 25, 25
    x11 = round(0.64 * m1)
    x00 = round(0.50 * m0)
    for i in range(m1):
        rows.append(("1" if i < x11 else "0", "1"))
    for i in range(m0):
        rows.append(("0" if i < x00 else "1", "0"))
    labeled = [f"c{i},{y},{yh},judge,pair\n" for i, (yh, y) in enumerate(rows)]
    n = 494 - m1 - m0
    p = (1 - 0.451) * 0.5 + 0.451 * 0.64
    n1 = round(n * p)
    unlabeled = [f"t{i},,{1 if i < n1 else 0},judge,pair\n" for i in range(n)]
    path.write_text(HEADER + "".join(labeled) + "".join(unlabeled), encoding="utf-8")
    return path


def _estimate_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


class TestEstimate:
    def test_perfect_judge_estimators_agree(self, tmp_path, capsys):
        data = _write_perfect_file(tmp_path / "perfect.csv")
        out_csv = tmp_path / "out.csv"
        rc = main(["estimate", "--input", str(data), "--output", str(out_csv)])
        assert rc == 0
        rows = {r["estimator"]: r for r in _estimate_rows(out_csv)}
        closed_form = [float(rows[name]["theta_hat"]) for name in ("naive", "rg", "ppi", "ppi++", "eif")]
        assert max(closed_form) - min(closed_form) <= 1e-12
        assert float(rows["mle"]["theta_hat"]) == pytest.approx(closed_form[0], abs=1e-6)
        header = capsys.readouterr().out.splitlines()[0]
        assert header.startswith("# judgecal estimate") and "seed=" in header

    def test_no_labeled_rows_exits_with_error_code(self, tmp_path, capsys):
        path = tmp_path / "unlabeled.csv"
        path.write_text(HEADER + "1,,1,j,p\n2,,0,j,p\n", encoding="utf-8")
        rc = main(["estimate", "--input", str(path)])
        assert rc == 2
        assert "DegenerateCalibrationClass" in capsys.readouterr().err

    def test_weak_judge_interval_blowup(self, tmp_path):
        data = _write_weak_judge_file(tmp_path / "weak.csv")
        out_csv = tmp_path / "out.csv"
        assert main(["estimate", "--input", str(data), "--output", str(out_csv)]) == 0
        rows = {r["estimator"]: r for r in _estimate_rows(out_csv)}
        width = lambda r: float(r["ci_upper"]) - float(r["ci_lower"])
        assert width(rows["rg"]) >= 2.5 * width(rows["eif"])

    def test_json_output(self, tmp_path, capsys):
        data = _write_perfect_file(tmp_path / "perfect.csv")
        assert main(["estimate", "--input", str(data), "--json", "--estimators", "naive,ppi"]) == 0
        out = capsys.readouterr().out
        payload = json.loads(out[out.index("[") :])
        assert {row["estimator"] for row in payload} == {"naive", "ppi"}

    def test_figures_written(self, tmp_path):
        data = _write_perfect_file(tmp_path / "perfect.csv")
        figdir = tmp_path / "figs"
        assert main(["estimate", "--input", str(data), "--figures", str(figdir)]) == 0
        assert (figdir / "estimate_ci.png").exists()


class TestCompare:
    def test_groups_by_pair_and_judge(self, tmp_path, capsys):
        lines = [HEADER]
        for judge in ("a", "b"):
            for i in range(12):
                lines.append(f"{judge}{i},{i % 2},{i % 2},{judge},flash\n")
            for i in range(20):
                lines.append(f"{judge}t{i},,{i % 2},{judge},flash\n")
        path = tmp_path / "two_judges.csv"
        path.write_text("".join(lines), encoding="utf-8")
        out_csv = tmp_path / "cmp.csv"
        rc = main(["compare", "--input", str(path), "--estimators", "naive,ppi", "--output", str(out_csv)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "judge=a" in out and "judge=b" in out
        assert len(_estimate_rows(out_csv)) == 4


class TestSimulate:
    def test_smoke_run_reproducible(self, tmp_path, capsys):
        args = [
            "simulate", "--B", "10", "--theta", "0.5", "--q", "0.8",
            "--budget", "0.1", "--seed", "1", "--N", "300", "--parallelism", "1",
        ]
        assert main(args + ["--output", str(tmp_path / "a.csv")]) == 0
        assert main(args + ["--output", str(tmp_path / "b.csv")]) == 0
        assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
        header = capsys.readouterr().out.splitlines()[0]
        assert "seed=1" in header

    def test_grid_flag_spellings_agree(self, tmp_path):
        short = ["simulate", "--B", "5", "--theta", "0.4", "--q", "0.7", "--budget", "0.1",
                 "--seed", "2", "--N", "200", "--parallelism", "1"]
        long = ["simulate", "--B", "5", "--grid-theta", "0.4", "--grid-q", "0.7", "--budget", "0.1",
                "--seed", "2", "--N", "200", "--parallelism", "1"]
        assert main(short + ["--output", str(tmp_path / "s.csv")]) == 0
        assert main(long + ["--output", str(tmp_path / "l.csv")]) == 0
        assert (tmp_path / "s.csv").read_text() == (tmp_path / "l.csv").read_text()

    def test_mixture_run_with_figures(self, tmp_path):
        figdir = tmp_path / "figs"
        rc = main([
            "simulate", "--dgp", "mixture", "--grid-mu3", "9", "--budget", "0.1",
            "--B", "3", "--seed", "2", "--N", "300", "--parallelism", "1",
            "--output", str(tmp_path / "mix.csv"), "--figures", str(figdir),
        ])
        assert rc == 0
        assert (figdir / "mixture_coverage.png").exists()
        assert (figdir / "mixture_mean_width.png").exists()

    def test_replicate_failures_do_not_break_exit_zero(self, tmp_path, capsys):
        rc = main([
            "simulate", "--B", "60", "--grid-theta", "0.05", "--grid-q", "0.7",
            "--budget", "0.15", "--seed", "8", "--N", "60", "--parallelism", "1",
            "--estimators", "rg,eif", "--output", str(tmp_path / "frail.csv"),
        ])
        assert rc == 0
        header = capsys.readouterr().out.splitlines()[0]
        failures = int(header.rsplit("replicate_failures=", 1)[1])
        assert failures > 0

    def test_binary_figures_written(self, tmp_path):
        figdir = tmp_path / "figs"
        rc = main([
            "simulate", "--B", "4", "--grid-theta", "0.3,0.5", "--grid-q", "0.8",
            "--budget", "0.2", "--seed", "6", "--N", "200", "--parallelism", "1",
            "--estimators", "naive,ppi,eif",
            "--output", str(tmp_path / "grid.csv"), "--figures", str(figdir),
        ])
        assert rc == 0
        for name in ("binary_coverage.png", "binary_mean_width.png", "binary_bias.png"):
            assert (figdir / name).exists()

    def test_rmse_study_mode(self, tmp_path):
        rc = main([
            "simulate", "--rmse-study", "--B", "20", "--grid-theta", "0.3",
            "--grid-q", "0.7", "--budget", "0.2", "--seed", "3", "--N", "200",
            "--parallelism", "1", "--output", str(tmp_path / "rmse.csv"),
        ])
        assert rc == 0
        with open(tmp_path / "rmse.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 1 and "rmse_q1" in rows[0]


class TestSplitCoverage:
    def test_smoke(self, tmp_path):
        rng = np.random.default_rng(0)
        lines = [HEADER]
        for i in range(160):
            y = int(rng.random() < 0.5)
            yh = y if rng.random() < 0.8 else 1 - y
            lines.append(f"{i},{y},{yh},j,p\n")
        path = tmp_path / "corpus.csv"
        path.write_text("".join(lines), encoding="utf-8")
        out = tmp_path / "cov.csv"
        figdir = tmp_path / "figs"
        rc = main([
            "split-coverage", "--input", str(path), "--budget", "0.2", "--B", "50",
            "--seed", "4", "--estimators", "ppi,eif", "--output", str(out),
            "--figures", str(figdir),
        ])
        assert rc == 0
        with open(out, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert {r["estimator"] for r in rows} == {"ppi", "eif"}
        assert all(r["scenario"] == "resplit" for r in rows)
        assert (figdir / "resplit_coverage_width.png").exists()


class TestIdentityCheckCommand:
    def test_passes(self, capsys):
        assert main(["identity-check", "--points", "2000", "--seed", "5"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 6
        assert "seed=5" in out


def test_module_entry_point_help():
    proc = subprocess.run(
        [sys.executable, "-m", "judgecal.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    for command in ("estimate", "compare", "simulate", "split-coverage", "identity-check"):
        assert command in proc.stdout
