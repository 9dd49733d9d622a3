"""Seeded Monte Carlo engine for coverage, width, and bias studies.

Replicate b of a run draws from an RNG stream derived from (seed, b) with a
counter-based generator, so reports are bit-identical for a given seed no
matter how replicates are scheduled across workers. Per-replicate estimator
failures (degenerate cells, non-invertible corrections) are counted and
excluded from the metric averages rather than aborting the run.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .calibration import MU_FAMILIES, estimate_all_continuous
from .datasets import BinaryDataset, ContinuousDataset, summarize_calibration
from .errors import DegenerateSplit, EstimationError
from .estimators import BINARY_ESTIMATORS, estimate_error_rates
from .inference import estimate_all

SCENARIO_BINARY = "binary"
SCENARIO_MIXTURE = "mixture"
SCENARIO_RESPLIT = "resplit"


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent counter-based stream for one replicate of one run."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, replicate))))


@dataclass(frozen=True)
class BinarySimConfig:
    theta: float
    q0: float
    q1: float
    N: int = 2000
    labeled_fraction: float = 0.10
    B: int = 1000
    level: float = 0.90
    seed: int = 0
    estimators: tuple[str, ...] = BINARY_ESTIMATORS

    def __post_init__(self):
        if self.N < 2 or self.B < 1:
            raise ValueError("need N >= 2 and B >= 1")
        if not 0.0 < self.labeled_fraction < 1.0:
            raise ValueError("labeled_fraction must lie in (0, 1)")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")

    @property
    def truth(self) -> float:
        return self.theta


@dataclass(frozen=True)
class ContinuousSimConfig:
    mu: tuple[float, float, float]
    sigma: float = 1.0
    N: int = 2000
    labeled_fraction: float = 0.10
    B: int = 500
    level: float = 0.90
    seed: int = 0
    mu_families: tuple[str, ...] = MU_FAMILIES
    base_estimators: tuple[str, ...] = ("naive", "ppi", "ppi++")

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.N < 2 or self.B < 1:
            raise ValueError("need N >= 2 and B >= 1")
        if not 0.0 < self.labeled_fraction < 1.0:
            raise ValueError("labeled_fraction must lie in (0, 1)")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")

    @property
    def estimators(self) -> tuple[str, ...]:
        return self.base_estimators + tuple(f"eif_{fam}" for fam in self.mu_families)

    @property
    def truth(self) -> float:
        return sum(self.mu) / len(self.mu)


@dataclass(frozen=True)
class ReportRow:
    """Aggregated metrics for one (configuration, estimator) pair.

    Metrics are computed over the non-failed replicates only; the failure
    count is reported alongside so small-budget fragility stays visible.
    Every metric carries its Monte Carlo standard error.
    """

    scenario: str
    theta: float | None
    q0: float | None
    q1: float | None
    mu1: float | None
    mu2: float | None
    mu3: float | None
    sigma: float | None
    N: int
    labeled_fraction: float
    B: int
    level: float
    seed: int
    truth: float
    estimator: str
    n_ok: int
    n_failed: int
    n_converged: int | None
    mean_estimate: float | None
    bias: float | None
    bias_mc_se: float | None
    rmse: float | None
    rmse_mc_se: float | None
    coverage: float | None
    coverage_mc_se: float | None
    mean_width: float | None
    mean_width_mc_se: float | None


@dataclass(frozen=True)
class MonteCarloReport:
    rows: tuple[ReportRow, ...]

    kind = "monte_carlo"

    def row(self, estimator: str, **config_match) -> ReportRow:
        """Fetch the single row matching an estimator and config fields."""
        hits = [
            r
            for r in self.rows
            if r.estimator == estimator
            and all(getattr(r, k) == v for k, v in config_match.items())
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match estimator={estimator!r} {config_match}")
        return hits[0]


@dataclass(frozen=True)
class RmseRow:
    theta: float
    q0: float
    q1: float
    N: int
    labeled_fraction: float
    B: int
    seed: int
    n_ok: int
    n_failed: int
    rmse_q0: float | None
    rmse_q0_mc_se: float | None
    rmse_q1: float | None
    rmse_q1_mc_se: float | None


@dataclass(frozen=True)
class CalibrationRmseReport:
    rows: tuple[RmseRow, ...]

    kind = "calibration_rmse"


def generate_binary_dataset(
    theta: float,
    q0: float,
    q1: float,
    N: int,
    labeled_fraction: float,
    rng: np.random.Generator,
) -> BinaryDataset:
    """Draw one synthetic evaluation: true labels, judge labels, and a
    Bernoulli calibration membership (so the class counts are random).

    Draw order is fixed (labels, judge labels, membership) so a stream
    replays identically. An all-test or all-calibration membership draw is
    resampled once, then the replicate fails.
    """
    y = (rng.random(N) < theta).astype(np.int64)
    u = rng.random(N)
    yhat = np.where(y == 1, u < q1, u < 1.0 - q0).astype(np.int64)
    mask = rng.random(N) < labeled_fraction
    if mask.all() or not mask.any():
        mask = rng.random(N) < labeled_fraction
        if mask.all() or not mask.any():
            raise DegenerateSplit("calibration membership degenerate twice")
    return BinaryDataset(cal_y=y[mask], cal_yhat=yhat[mask], test_yhat=yhat[~mask])


def generate_mixture_dataset(config: ContinuousSimConfig, rng: np.random.Generator) -> ContinuousDataset:
    """Latent three-component mixture: the judge reports the component index,
    the human outcome is Normal(mu_component, sigma^2)."""
    z = rng.integers(1, 4, size=config.N)
    mu = np.asarray(config.mu, dtype=np.float64)
    y = mu[z - 1] + config.sigma * rng.standard_normal(config.N)
    mask = rng.random(config.N) < config.labeled_fraction
    if mask.all() or not mask.any():
        mask = rng.random(config.N) < config.labeled_fraction
        if mask.all() or not mask.any():
            raise DegenerateSplit("calibration membership degenerate twice")
    yhat = z.astype(np.float64)
    return ContinuousDataset(cal_y=y[mask], cal_yhat=yhat[mask], test_yhat=yhat[~mask])


# --------------------------------------------------------------------------
# Replicate execution. Outcomes are small picklable tuples:
#   ("ok", theta_hat, ci_lower, ci_upper, converged_or_None) or
#   ("fail", error_class_name)
# --------------------------------------------------------------------------

def _results_to_outcomes(results) -> dict[str, tuple]:
    out = {}
    for name, res in results.items():
        if isinstance(res, EstimationError):
            out[name] = ("fail", type(res).__name__)
        else:
            converged = res.diagnostics.get("converged")
            out[name] = ("ok", res.theta_hat, res.ci.lower, res.ci.upper, converged)
    return out


def _binary_replicate(config: BinarySimConfig, estimators, b: int) -> dict[str, tuple]:
    rng = replicate_rng(config.seed, b)
    try:
        data = generate_binary_dataset(
            config.theta, config.q0, config.q1, config.N, config.labeled_fraction, rng
        )
    except EstimationError as err:
        return {name: ("fail", type(err).__name__) for name in estimators}
    return _results_to_outcomes(estimate_all(data, estimators, config.level))


def _mixture_replicate(config: ContinuousSimConfig, estimators, b: int) -> dict[str, tuple]:
    rng = replicate_rng(config.seed, b)
    try:
        data = generate_mixture_dataset(config, rng)
    except EstimationError as err:
        return {name: ("fail", type(err).__name__) for name in estimators}
    return _results_to_outcomes(estimate_all_continuous(data, estimators, config.level))


def _rmse_replicate(config: BinarySimConfig, estimators, b: int) -> dict[str, tuple]:
    rng = replicate_rng(config.seed, b)
    try:
        data = generate_binary_dataset(
            config.theta, config.q0, config.q1, config.N, config.labeled_fraction, rng
        )
        rates = estimate_error_rates(summarize_calibration(data))
    except EstimationError as err:
        return {"rates": ("fail", type(err).__name__)}
    return {"rates": ("ok", rates.q0, rates.q1)}


_REPLICATE_FNS = {
    SCENARIO_BINARY: _binary_replicate,
    SCENARIO_MIXTURE: _mixture_replicate,
    "rmse": _rmse_replicate,
}


def _worker(payload):
    kind, config, estimators, bs = payload
    fn = _REPLICATE_FNS[kind]
    return [(b, fn(config, estimators, b)) for b in bs]


def _run_replicates(kind: str, config, estimators, parallelism: int) -> list[dict]:
    """Execute B replicates; the result list is ordered by replicate index
    regardless of worker count, so aggregation is schedule-independent."""
    bs = list(range(config.B))
    if parallelism is None:
        parallelism = 1
    if parallelism <= 1 or config.B == 1:
        pairs = _worker((kind, config, estimators, bs))
    else:
        workers = min(parallelism, config.B)
        chunks = [list(chunk) for chunk in np.array_split(bs, workers * 4) if len(chunk)]
        payloads = [(kind, config, estimators, chunk) for chunk in chunks]
        pairs = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_worker, payloads):
                pairs.extend(part)
    pairs.sort(key=lambda item: item[0])
    return [outcome for _, outcome in pairs]


def _mean_se(values: np.ndarray) -> tuple[float, float | None]:
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, None
    return mean, float(np.std(values, ddof=1) / np.sqrt(values.size))


def _aggregate_rows(config, scenario: str, estimators, outcomes: list[dict]) -> list[ReportRow]:
    truth = config.truth
    common = dict(
        scenario=scenario,
        theta=getattr(config, "theta", None),
        q0=getattr(config, "q0", None),
        q1=getattr(config, "q1", None),
        mu1=config.mu[0] if hasattr(config, "mu") else None,
        mu2=config.mu[1] if hasattr(config, "mu") else None,
        mu3=config.mu[2] if hasattr(config, "mu") else None,
        sigma=getattr(config, "sigma", None),
        N=config.N,
        labeled_fraction=config.labeled_fraction,
        B=config.B,
        level=config.level,
        seed=config.seed,
        truth=truth,
    )
    rows = []
    for name in estimators:
        thetas, widths, covered, conv = [], [], [], []
        n_failed = 0
        for outcome in outcomes:
            record = outcome[name]
            if record[0] == "fail":
                n_failed += 1
                continue
            _, theta_hat, lower, upper, converged = record
            thetas.append(theta_hat)
            widths.append(upper - lower)
            covered.append(lower <= truth <= upper)
            if converged is not None:
                conv.append(bool(converged))
        n_ok = len(thetas)
        if n_ok == 0:
            rows.append(
                ReportRow(
                    **common, estimator=name, n_ok=0, n_failed=n_failed, n_converged=None,
                    mean_estimate=None, bias=None, bias_mc_se=None, rmse=None, rmse_mc_se=None,
                    coverage=None, coverage_mc_se=None, mean_width=None, mean_width_mc_se=None,
                )
            )
            continue
        thetas = np.asarray(thetas)
        widths = np.asarray(widths)
        covered = np.asarray(covered, dtype=float)
        mean_est, bias_se = _mean_se(thetas)
        mean_width, width_se = _mean_se(widths)
        coverage = float(np.mean(covered))
        coverage_se = float(np.sqrt(coverage * (1.0 - coverage) / n_ok))
        sq_err = (thetas - truth) ** 2
        rmse = float(np.sqrt(np.mean(sq_err)))
        if rmse > 0 and n_ok > 1:
            rmse_se = float(np.std(sq_err, ddof=1) / (2.0 * rmse * np.sqrt(n_ok)))
        else:
            rmse_se = None
        rows.append(
            ReportRow(
                **common,
                estimator=name,
                n_ok=n_ok,
                n_failed=n_failed,
                n_converged=sum(conv) if conv else None,
                mean_estimate=mean_est,
                bias=mean_est - truth,
                bias_mc_se=bias_se,
                rmse=rmse,
                rmse_mc_se=rmse_se,
                coverage=coverage,
                coverage_mc_se=coverage_se,
                mean_width=mean_width,
                mean_width_mc_se=width_se,
            )
        )
    return rows


def run_grid(
    configs,
    estimators: tuple[str, ...] | None = None,
    parallelism: int = 1,
) -> MonteCarloReport:
    """Run every configuration for B replicates each and aggregate metrics.

    ``estimators`` overrides the per-config estimator set when given. The
    report is deterministic in (configs, seed) and independent of
    ``parallelism``.
    """
    rows: list[ReportRow] = []
    for config in configs:
        if isinstance(config, BinarySimConfig):
            names = estimators or config.estimators
            outcomes = _run_replicates(SCENARIO_BINARY, config, names, parallelism)
            rows.extend(_aggregate_rows(config, SCENARIO_BINARY, names, outcomes))
        elif isinstance(config, ContinuousSimConfig):
            names = estimators or config.estimators
            outcomes = _run_replicates(SCENARIO_MIXTURE, config, names, parallelism)
            rows.extend(_aggregate_rows(config, SCENARIO_MIXTURE, names, outcomes))
        else:
            raise TypeError(f"unsupported config type {type(config).__name__}")
    return MonteCarloReport(tuple(rows))


def calibration_rmse_study(configs, parallelism: int = 1) -> CalibrationRmseReport:
    """Finite-sample RMSE of the plug-in error rates across replicates.

    Replicates where a human-label class is empty cannot produce rates and
    are counted as failures.
    """
    rows = []
    for config in configs:
        if not isinstance(config, BinarySimConfig):
            raise TypeError("calibration RMSE study needs binary configurations")
        outcomes = _run_replicates("rmse", config, ("rates",), parallelism)
        q0_hats, q1_hats = [], []
        n_failed = 0
        for outcome in outcomes:
            record = outcome["rates"]
            if record[0] == "fail":
                n_failed += 1
                continue
            q0_hats.append(record[1])
            q1_hats.append(record[2])
        n_ok = len(q0_hats)

        def _rmse_pair(values, target):
            if not values:
                return None, None
            sq = (np.asarray(values) - target) ** 2
            rmse = float(np.sqrt(np.mean(sq)))
            if rmse == 0.0 or len(values) < 2:
                return rmse, None
            return rmse, float(np.std(sq, ddof=1) / (2.0 * rmse * np.sqrt(len(values))))

        rmse_q0, se_q0 = _rmse_pair(q0_hats, config.q0)
        rmse_q1, se_q1 = _rmse_pair(q1_hats, config.q1)
        rows.append(
            RmseRow(
                theta=config.theta,
                q0=config.q0,
                q1=config.q1,
                N=config.N,
                labeled_fraction=config.labeled_fraction,
                B=config.B,
                seed=config.seed,
                n_ok=n_ok,
                n_failed=n_failed,
                rmse_q0=rmse_q0,
                rmse_q0_mc_se=se_q0,
                rmse_q1=rmse_q1,
                rmse_q1_mc_se=se_q1,
            )
        )
    return CalibrationRmseReport(tuple(rows))


def default_binary_grid(seed: int = 0, B: int = 1000) -> list[BinarySimConfig]:
    """Full factorial default grid: theta 0.1..0.9, symmetric judge accuracy
    in {0.6, 0.7, 0.8}, labeling budgets {1%, 5%, 10%}, N = 2000."""
    configs = []
    for q in (0.6, 0.7, 0.8):
        for budget in (0.01, 0.05, 0.10):
            for theta in np.round(np.arange(0.1, 0.91, 0.1), 2):
                configs.append(
                    BinarySimConfig(
                        theta=float(theta), q0=q, q1=q, labeled_fraction=budget,
                        B=B, seed=seed,
                    )
                )
    return configs
