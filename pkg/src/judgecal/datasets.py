"""Dataset containers for judged evaluations.

A binary dataset holds a small calibration set with paired (human, judge)
labels and a larger test set with judge labels only; the continuous variant
carries real-valued outcomes and arbitrary judge scores. Both are immutable
once constructed so they can be shared freely across worker processes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCalibrationSet


def _as_binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 labels")
    arr.setflags(write=False)
    return arr


def _as_real(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BinaryDataset:
    """Binary human labels paired with binary judge labels.

    ``cal_y[j]`` and ``cal_yhat[j]`` are the paired calibration observations
    (m of them); ``test_yhat[i]`` are the judge-only test observations (n of
    them). Calibration and test rows must come from disjoint units; that
    provenance is the loader's responsibility.
    """

    cal_y: np.ndarray
    cal_yhat: np.ndarray
    test_yhat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cal_y", _as_binary(self.cal_y, "cal_y"))
        object.__setattr__(self, "cal_yhat", _as_binary(self.cal_yhat, "cal_yhat"))
        object.__setattr__(self, "test_yhat", _as_binary(self.test_yhat, "test_yhat"))
        if self.cal_y.size != self.cal_yhat.size:
            raise ValueError("cal_y and cal_yhat must have equal length")
        if self.cal_y.size < 1:
            raise EmptyCalibrationSet("calibration set must contain at least one pair")

    @property
    def m(self) -> int:
        return int(self.cal_y.size)

    @property
    def n(self) -> int:
        return int(self.test_yhat.size)

    @property
    def total(self) -> int:
        return self.m + self.n

    def all_yhat(self) -> np.ndarray:
        """Judge labels over calibration then test, in that fixed order."""
        return np.concatenate([self.cal_yhat, self.test_yhat])


@dataclass(frozen=True)
class CalibrationSummary:
    """Sufficient statistics of the calibration set.

    ``x_ab`` counts pairs with y=a and y_hat=b. The conditional means
    ``mu1_hat`` (among y_hat=1) and ``mu0_hat`` (among y_hat=0) are None when
    the corresponding judge-label cell is empty.
    """

    m: int
    m1: int
    m0: int
    x00: int
    x01: int
    x10: int
    x11: int
    y_bar: float
    yhat_bar: float
    mu0_hat: float | None
    mu1_hat: float | None


def summarize_calibration(data: BinaryDataset) -> CalibrationSummary:
    """Reduce the calibration pairs to exact integer counts.

    All downstream ratios divide these counts once at the point of use,
    which keeps repeated calls bit-for-bit reproducible.
    """
    y = data.cal_y
    yh = data.cal_yhat
    x11 = int(np.sum((y == 1) & (yh == 1)))
    x10 = int(np.sum((y == 1) & (yh == 0)))
    x01 = int(np.sum((y == 0) & (yh == 1)))
    x00 = int(np.sum((y == 0) & (yh == 0)))
    m = data.m
    pos_cell = x11 + x01
    neg_cell = x10 + x00
    return CalibrationSummary(
        m=m,
        m1=x11 + x10,
        m0=x01 + x00,
        x00=x00,
        x01=x01,
        x10=x10,
        x11=x11,
        y_bar=(x11 + x10) / m,
        yhat_bar=(x11 + x01) / m,
        mu1_hat=(x11 / pos_cell) if pos_cell else None,
        mu0_hat=(x10 / neg_cell) if neg_cell else None,
    )


@dataclass(frozen=True)
class ContinuousDataset:
    """Real-valued outcomes with ordinal or continuous judge scores.

    ``labeled_probability`` is the design probability that a unit lands in
    the calibration set; when None, the empirical fraction m/N is used by
    estimators that need it.
    """

    cal_y: np.ndarray
    cal_yhat: np.ndarray
    test_yhat: np.ndarray
    labeled_probability: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "cal_y", _as_real(self.cal_y, "cal_y"))
        object.__setattr__(self, "cal_yhat", _as_real(self.cal_yhat, "cal_yhat"))
        object.__setattr__(self, "test_yhat", _as_real(self.test_yhat, "test_yhat"))
        if self.cal_y.size != self.cal_yhat.size:
            raise ValueError("cal_y and cal_yhat must have equal length")
        if self.cal_y.size < 1:
            raise EmptyCalibrationSet("calibration set must contain at least one pair")
        if self.labeled_probability is not None and not 0.0 < self.labeled_probability < 1.0:
            raise ValueError("labeled_probability must lie in (0, 1)")

    @property
    def m(self) -> int:
        return int(self.cal_y.size)

    @property
    def n(self) -> int:
        return int(self.test_yhat.size)

    @property
    def total(self) -> int:
        return self.m + self.n

    def all_yhat(self) -> np.ndarray:
        return np.concatenate([self.cal_yhat, self.test_yhat])
