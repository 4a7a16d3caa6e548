import numpy as np
import pytest

from roshap.dataset import CLASSIFICATION, REGRESSION, Dataset, SimulationConfig, simulate_zig
from roshap.trees import GbdtParams, fit_gbdt


@pytest.fixture(scope="session")
def small_sim():
    """Reduced zero-inflated design: 5 signals among 30 features, 200 rows."""
    return simulate_zig(SimulationConfig(n=200, d=30, s=5), seed=11)


@pytest.fixture(scope="session")
def xor_dataset():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1.0, 1.0, size=(200, 2))
    X[np.abs(X) < 0.05] += 0.1  # keep points off the axes
    y = ((X[:, 0] * X[:, 1]) > 0).astype(np.float64)
    return Dataset(X, y, ("a", "b"), CLASSIFICATION)


@pytest.fixture(scope="session")
def xor_model(xor_dataset):
    return fit_gbdt(xor_dataset, GbdtParams(num_rounds=50, max_depth=2), seed=0)


def random_dataset(rng, n=120, p=6, task=CLASSIFICATION):
    X = rng.normal(size=(n, p))
    if task == CLASSIFICATION:
        w = rng.normal(size=p)
        y = (X @ w + 0.5 * rng.normal(size=n) > 0).astype(np.float64)
        if y.min() == y.max():
            y[0] = 1.0 - y[0]
    else:
        y = X @ rng.normal(size=p) + 0.2 * rng.normal(size=n)
    names = tuple(f"f{j}" for j in range(p))
    return Dataset(X, y, names, task)


def random_small_ensemble(rng, p_max=8, t_max=5, depth_max=4):
    """A trained ensemble small enough for coalition enumeration."""
    p = int(rng.integers(2, p_max + 1))
    task = CLASSIFICATION if rng.random() < 0.5 else REGRESSION
    ds = random_dataset(rng, n=int(rng.integers(40, 120)), p=p, task=task)
    params = GbdtParams(num_rounds=int(rng.integers(1, t_max + 1)),
                        max_depth=int(rng.integers(1, depth_max + 1)),
                        learning_rate=float(rng.uniform(0.1, 1.0)),
                        lambda_l2=float(rng.choice([0.0, 0.5, 1.0])),
                        min_child_weight=float(rng.choice([0.0, 0.5, 1.0])))
    return fit_gbdt(ds, params, seed=0), ds
