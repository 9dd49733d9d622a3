import numpy as np
import pytest

from judgecal.datasets import BinaryDataset


def random_binary_dataset(rng, n_total=None, require_cells=False, max_total=50):
    """Small random dataset with at least one calibration and one test row.

    With ``require_cells`` the calibration set is resampled until both judge
    label cells are occupied (needed for conditional-mean estimators).
    """
    for _ in range(1000):
        total = n_total or int(rng.integers(4, max_total + 1))
        theta = rng.uniform(0.15, 0.85)
        q0 = rng.uniform(0.55, 0.95)
        q1 = rng.uniform(0.55, 0.95)
        y = (rng.random(total) < theta).astype(np.int64)
        u = rng.random(total)
        yhat = np.where(y == 1, u < q1, u < 1.0 - q0).astype(np.int64)
        mask = rng.random(total) < rng.uniform(0.2, 0.8)
        if not mask.any() or mask.all():
            continue
        data = BinaryDataset(y[mask], yhat[mask], yhat[~mask])
        if require_cells and (data.cal_yhat.min() == data.cal_yhat.max()):
            continue
        return data
    raise RuntimeError("failed to draw a usable dataset")


@pytest.fixture
def rng():
    return np.random.default_rng(20250808)
