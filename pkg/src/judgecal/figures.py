"""Matplotlib rendering of simulation reports and estimate tables to files."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file output only; must be set before pyplot loads

import matplotlib.pyplot as plt

from .simulate import (
    SCENARIO_BINARY,
    SCENARIO_MIXTURE,
    SCENARIO_RESPLIT,
    CalibrationRmseReport,
    MonteCarloReport,
)

_COLORS = {
    "naive": "tab:gray",
    "rg": "tab:red",
    "ppi": "tab:blue",
    "ppi++": "tab:green",
    "mle": "tab:purple",
    "eif": "tab:orange",
    "eif_categorical": "tab:orange",
    "eif_linear": "tab:brown",
    "eif_spline": "tab:cyan",
}


def _color(name: str) -> str:
    return _COLORS.get(name, "black")


def _metric_panels(rows, x_field: str, metric: str, se_field: str, ax, nominal=None):
    estimators = sorted({r.estimator for r in rows})
    for name in estimators:
        series = sorted((r for r in rows if r.estimator == name), key=lambda r: getattr(r, x_field))
        xs = [getattr(r, x_field) for r in series]
        ys = [getattr(r, metric) for r in series]
        errs = [2 * (getattr(r, se_field) or 0.0) for r in series]
        ax.errorbar(xs, ys, yerr=errs, marker="o", ms=3, lw=1, capsize=2, label=name, color=_color(name))
    if nominal is not None:
        ax.axhline(nominal, color="black", ls="--", lw=0.8)
    ax.set_xlabel(x_field)
    ax.set_ylabel(metric)


def _facet_figure(rows, x_field: str, metric: str, se_field: str, path: Path, nominal=None):
    accuracy_pairs = sorted({(r.q0, r.q1) for r in rows})
    budgets = sorted({r.labeled_fraction for r in rows})
    n_rows, n_cols = len(accuracy_pairs), len(budgets)
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(3.4 * n_cols, 2.6 * n_rows), squeeze=False, sharex=True
    )
    for i, pair in enumerate(accuracy_pairs):
        for j, budget in enumerate(budgets):
            cell = [r for r in rows if (r.q0, r.q1) == pair and r.labeled_fraction == budget]
            ax = axes[i][j]
            if cell:
                _metric_panels(cell, x_field, metric, se_field, ax, nominal)
            ax.set_title(f"q0={pair[0]:g}, q1={pair[1]:g}, budget={budget:g}", fontsize=8)
    handles, labels = axes[0][0].get_legend_handles_labels()
    if handles:
        fig.legend(handles, labels, loc="lower center", ncol=min(6, len(labels)), fontsize=8)
    fig.tight_layout(rect=(0, 0.06, 1, 1))
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _mixture_figure(rows, metric: str, se_field: str, path: Path, nominal=None):
    budgets = sorted({r.labeled_fraction for r in rows})
    fig, axes = plt.subplots(1, len(budgets), figsize=(3.6 * len(budgets), 3.0), squeeze=False)
    for j, budget in enumerate(budgets):
        cell = [r for r in rows if r.labeled_fraction == budget]
        ax = axes[0][j]
        _metric_panels(cell, "mu3", metric, se_field, ax, nominal)
        ax.set_title(f"budget={budget:g}", fontsize=9)
    handles, labels = axes[0][0].get_legend_handles_labels()
    if handles:
        fig.legend(handles, labels, loc="lower center", ncol=min(6, len(labels)), fontsize=8)
    fig.tight_layout(rect=(0, 0.1, 1, 1))
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _resplit_figure(rows, path: Path):
    fig, (ax_cov, ax_width) = plt.subplots(1, 2, figsize=(8, 3.2))
    names = [r.estimator for r in rows]
    for ax, metric, se_field in (
        (ax_cov, "coverage", "coverage_mc_se"),
        (ax_width, "mean_width", "mean_width_mc_se"),
    ):
        values = [getattr(r, metric) or 0.0 for r in rows]
        errs = [2 * (getattr(r, se_field) or 0.0) for r in rows]
        ax.bar(names, values, yerr=errs, color=[_color(n) for n in names], capsize=3)
        ax.set_ylabel(metric)
        ax.tick_params(axis="x", rotation=30)
    if rows:
        ax_cov.axhline(rows[0].level, color="black", ls="--", lw=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_report_figures(report, outdir) -> list[Path]:
    """Render one PNG per metric family next to the delimited report."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if isinstance(report, CalibrationRmseReport):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for metric, style in (("rmse_q0", "-o"), ("rmse_q1", "--s")):
            series = sorted(report.rows, key=lambda r: r.theta)
            ax.plot([r.theta for r in series], [getattr(r, metric) for r in series], style, label=metric)
        ax.set_xlabel("theta")
        ax.set_ylabel("rmse")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = outdir / "calibration_rmse.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        return [path]

    if not isinstance(report, MonteCarloReport):
        raise TypeError(f"cannot render {type(report).__name__}")

    binary_rows = [r for r in report.rows if r.scenario == SCENARIO_BINARY]
    mixture_rows = [r for r in report.rows if r.scenario == SCENARIO_MIXTURE]
    resplit_rows = [r for r in report.rows if r.scenario == SCENARIO_RESPLIT]

    if binary_rows:
        level = binary_rows[0].level
        for metric, se_field, nominal in (
            ("coverage", "coverage_mc_se", level),
            ("mean_width", "mean_width_mc_se", None),
            ("bias", "bias_mc_se", 0.0),
        ):
            path = outdir / f"binary_{metric}.png"
            _facet_figure(binary_rows, "theta", metric, se_field, path, nominal)
            written.append(path)
    if mixture_rows:
        level = mixture_rows[0].level
        for metric, se_field, nominal in (
            ("coverage", "coverage_mc_se", level),
            ("mean_width", "mean_width_mc_se", None),
        ):
            path = outdir / f"mixture_{metric}.png"
            _mixture_figure(mixture_rows, metric, se_field, path, nominal)
            written.append(path)
    if resplit_rows:
        path = outdir / "resplit_coverage_width.png"
        _resplit_figure(resplit_rows, path)
        written.append(path)
    return written


def save_estimate_figure(groups, path) -> Path:
    """Forest plot of point estimates and intervals, one panel per group.

    ``groups`` is a list of (label, results) where results maps estimator
    name to an InferenceResult (failures already filtered out).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, axes = plt.subplots(len(groups), 1, figsize=(6, 1.2 + 1.4 * len(groups)), squeeze=False)
    for ax, (label, results) in zip(axes[:, 0], groups):
        names = list(results)
        for k, name in enumerate(names):
            res = results[name]
            ax.errorbar(
                [res.theta_hat],
                [k],
                xerr=[[res.theta_hat - res.ci.lower], [res.ci.upper - res.theta_hat]],
                fmt="o",
                color=_color(name),
                capsize=3,
            )
        ax.set_yticks(range(len(names)), names)
        ax.invert_yaxis()
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("estimate")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
