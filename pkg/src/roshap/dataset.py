"""Data ingestion, train/test splitting, bootstrap resampling with out-of-bag
tracking, and the zero-inflated Gaussian simulation generator.

All randomness flows through explicit seeds (``numpy.random.default_rng``);
there is no module-level generator state. Datasets are immutable after
construction and safe to share read-only across parallel workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError

CLASSIFICATION = "binary-classification"
REGRESSION = "regression"
TASKS = (CLASSIFICATION, REGRESSION)

_MASK64 = (1 << 64) - 1


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix plus response.

    ``features`` is (n, p) float64, ``target`` is (n,) float64 holding class
    labels in {0, 1} for binary classification or real values for regression.
    """

    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    task: str

    def __post_init__(self):
        object.__setattr__(self, "features", _as_readonly(self.features))
        object.__setattr__(self, "target", _as_readonly(self.target))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        X, y = self.features, self.target
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        n, p = X.shape
        if n < 2 or p < 1:
            raise DataError(f"need at least 2 rows and 1 feature, got {n}x{p}")
        if y.shape != (n,):
            raise DataError(f"target length {y.shape} does not match {n} rows")
        if len(self.feature_names) != p:
            raise DataError(f"{len(self.feature_names)} names for {p} features")
        if not np.isfinite(X).all():
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise DataError(
                f"non-finite feature value at row {i}, column {self.feature_names[j]!r}"
            )
        if not np.isfinite(y).all():
            i = int(np.flatnonzero(~np.isfinite(y))[0])
            raise DataError(f"non-finite target value at row {i}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}, expected one of {TASKS}")
        if self.task == CLASSIFICATION:
            classes = np.unique(y)
            if not np.isin(classes, (0.0, 1.0)).all():
                raise DataError(
                    f"binary-classification target must lie in {{0, 1}}, found {classes}"
                )
            if classes.size < 2:
                raise DataError("binary-classification target contains a single class")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def select_rows(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.target[indices],
                       self.feature_names, self.task)

    def select_columns(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.intp)
        names = tuple(self.feature_names[j] for j in indices)
        return Dataset(self.features[:, indices], self.target, names, self.task)


@dataclass(frozen=True)
class BootstrapSplit:
    """One bootstrap draw: the with-replacement training multiset and its
    out-of-bag complement."""

    train_indices: np.ndarray
    oob_indices: np.ndarray
    run_id: int

    def __post_init__(self):
        tr = np.ascontiguousarray(self.train_indices, dtype=np.int64)
        oob = np.ascontiguousarray(self.oob_indices, dtype=np.int64)
        tr.setflags(write=False)
        oob.setflags(write=False)
        object.__setattr__(self, "train_indices", tr)
        object.__setattr__(self, "oob_indices", oob)


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of the zero-inflated Gaussian binary-classification generator.

    Defaults: n=600 observations, d=1000 predictors of which the first s=10
    carry signal through class-dependent nonzero means evenly spaced from
    mu_max down to mu_min (class 0 means are the negatives).
    """

    n: int = 600
    d: int = 1000
    s: int = 10
    sigma_signal: float = 3.0
    pi_signal: float = 0.3
    sigma_noise: float = 1.0
    pi_noise: float = 0.2
    mu_max: float = 1.5
    mu_min: float = 0.4

    def __post_init__(self):
        if self.n < 2 or self.d < 1 or self.s < 1:
            raise ConfigError("n, d, s must be positive (n >= 2)")
        if self.s > self.d:
            raise ConfigError(f"s={self.s} exceeds d={self.d}")
        if self.sigma_signal <= 0 or self.sigma_noise <= 0:
            raise ConfigError("sigma_signal and sigma_noise must be positive")
        for name in ("pi_signal", "pi_noise"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0, 1]")

    def signal_means(self) -> np.ndarray:
        """Class-1 nonzero means for the s signal features."""
        if self.s == 1:
            return np.array([self.mu_max])
        return np.linspace(self.mu_max, self.mu_min, self.s)


def load_csv(path, target_column: str, task: str,
             recode: dict[float, float] | None = None) -> Dataset:
    """Parse an RFC-4180-style CSV (header row required) into a Dataset.

    Every non-target column must be numeric; offending cells are reported with
    their row and column. ``recode`` maps exact feature values to replacements
    (e.g. a sentinel like 100 -> -110) before validation.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(str(e)) from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise DataError(f"{path}: target column {target_column!r} not found")
        t_col = header.index(target_column)
        names = tuple(h for i, h in enumerate(header) if i != t_col)
        feat_rows: list[list[float]] = []
        targets: list[float] = []
        for r, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
            vals = []
            for c, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell!r} at row {r}, column {header[c]!r}"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(
                        f"{path}: non-finite value {cell!r} at row {r}, column {header[c]!r}"
                    )
                vals.append(v)
            targets.append(vals.pop(t_col))
            feat_rows.append(vals)
    if not feat_rows:
        raise DataError(f"{path}: no data rows")
    X = np.asarray(feat_rows, dtype=np.float64)
    if recode:
        for old, new in recode.items():
            X[X == old] = new
    return Dataset(X, np.asarray(targets), names, task)


def write_csv(ds: Dataset, path, target_name: str = "y") -> None:
    """Write a Dataset back out in the same CSV dialect ``load_csv`` reads.

    Floats use shortest round-trip decimal form, so re-running a deterministic
    generator reproduces the file byte for byte.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [target_name])
        for i in range(ds.n_rows):
            writer.writerow([repr(float(v)) for v in ds.features[i]]
                            + [repr(float(ds.target[i]))])


def train_test_split(ds: Dataset, test_fraction: float, seed: int,
                     stratified: bool = False) -> tuple[Dataset, Dataset]:
    """Disjoint row partition, deterministic for a fixed seed.

    The test side gets round(n * test_fraction) rows (per class when
    stratified). Raises if rounding would empty either side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction={test_fraction} outside (0, 1)")
    if stratified and ds.task != CLASSIFICATION:
        raise ConfigError("stratified split requires a classification task")
    rng = np.random.default_rng(seed)
    n = ds.n_rows
    if stratified:
        test_parts = []
        for cls in (0.0, 1.0):
            idx = np.flatnonzero(ds.target == cls)
            m = int(round(idx.size * test_fraction))
            if m < 1 or m >= idx.size:
                raise ConfigError(
                    f"test_fraction={test_fraction} leaves an empty side for class {int(cls)}"
                )
            test_parts.append(rng.permutation(idx)[:m])
        test_idx = np.sort(np.concatenate(test_parts))
    else:
        m = int(round(n * test_fraction))
        if m < 1 or m >= n:
            raise ConfigError(f"test_fraction={test_fraction} leaves an empty side")
        test_idx = np.sort(rng.permutation(n)[:m])
    mask = np.zeros(n, dtype=bool)
    mask[test_idx] = True
    train_idx = np.flatnonzero(~mask)
    return ds.select_rows(train_idx), ds.select_rows(test_idx)


def bootstrap_resample(ds: Dataset, seed: int, run_id: int = 0,
                       stratified: bool = False, max_retries: int = 16) -> BootstrapSplit:
    """Draw n rows uniformly with replacement; out-of-bag = rows never drawn.

    An empty OOB set triggers a deterministic redraw with seed+k, bounded at
    ``max_retries`` attempts (only plausible for tiny n), then raises.
    """
    n = ds.n_rows
    if n < 2:
        raise DataError("bootstrap requires at least 2 rows")
    for attempt in range(max_retries + 1):
        rng = np.random.default_rng(seed + attempt)
        if stratified:
            parts = []
            for cls in (0.0, 1.0):
                idx = np.flatnonzero(ds.target == cls)
                parts.append(idx[rng.integers(0, idx.size, size=idx.size)])
            train = np.concatenate(parts)
        else:
            train = rng.integers(0, n, size=n)
        in_bag = np.zeros(n, dtype=bool)
        in_bag[train] = True
        oob = np.flatnonzero(~in_bag)
        if oob.size > 0:
            return BootstrapSplit(train, oob, run_id)
    raise NumericError(
        f"out-of-bag set empty after {max_retries} redraws (n={n}, seed={seed})"
    )


def derive_run_seed(master_seed: int, b: int) -> int:
    """Mix (master_seed, b) into one 64-bit seed via the SplitMix64 finalizer.

    Deterministic and independent of execution order, so bootstrap run b is
    reproducible no matter how many workers execute. SplitMix64 is a bijection
    of its input state, hence distinct b never collide for a fixed master seed.
    """
    if b < 1:
        raise ConfigError(f"run index b={b} must be >= 1")
    z = (master_seed + b * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def simulate_zig(cfg: SimulationConfig, seed: int) -> Dataset:
    """Generate the zero-inflated Gaussian binary-classification design.

    Y ~ Bernoulli(1/2). Signal feature j (j = 1..s) is 0 with probability
    pi_signal and otherwise N(mu_j1, sigma_signal^2) under class 1 with
    mu_j0 = -mu_j1; noise features are 0 with probability pi_noise and
    otherwise N(0, sigma_noise^2) under both classes.

    Draw order is fixed (labels, then the zero mask matrix, then the normal
    matrix) so outputs are reproducible per seed.
    """
    rng = np.random.default_rng(seed)
    n, d, s = cfg.n, cfg.d, cfg.s
    y = rng.integers(0, 2, size=n).astype(np.float64)
    pi = np.full(d, cfg.pi_noise)
    pi[:s] = cfg.pi_signal
    zero_mask = rng.random((n, d)) < pi
    z = rng.standard_normal((n, d))
    sigma = np.full(d, cfg.sigma_noise)
    sigma[:s] = cfg.sigma_signal
    mu = np.zeros((n, d))
    mu1 = cfg.signal_means()
    mu[:, :s] = np.where(y[:, None] == 1.0, mu1[None, :], -mu1[None, :])
    X = np.where(zero_mask, 0.0, mu + sigma * z)
    names = tuple(f"x{j + 1}" for j in range(d))
    return Dataset(X, y, names, CLASSIFICATION)
