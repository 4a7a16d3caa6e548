"""Competing importance measures: information gain over equal-frequency bins,
single train/test-split SHAP, and (via the trees module) model gain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attribution import ZERO_SNAP, RankingRow, RankingTable
from .dataset import CLASSIFICATION, Dataset, train_test_split
from .errors import ConfigError, DataError
from .trees import GbdtParams, fit_gbdt, gain_importance
from .treeshap import shap_matrix

METHODS = ("roshap", "single_shap", "gain", "info_gain")


@dataclass(frozen=True)
class ImportanceVector:
    method: str
    scores: np.ndarray

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        s = np.asarray(self.scores, dtype=np.float64)
        if not np.isfinite(s).all() or (s < 0).any():
            raise DataError("importance scores must be finite and >= 0")
        object.__setattr__(self, "scores", s)

    def ranking(self, feature_names=None) -> RankingTable:
        """Descending-score ranking table; ties break to lower feature index."""
        order = np.lexsort((np.arange(self.scores.size), -self.scores))
        rows = []
        for rank, j in enumerate(order, start=1):
            name = feature_names[j] if feature_names else str(j)
            rows.append(RankingRow(rank, int(j), name, float(self.scores[j]), None))
        return RankingTable(rows, method=self.method)


def _equal_frequency_bins(x: np.ndarray, num_bins: int) -> np.ndarray:
    """Bin ids from order-statistic quantile edges (duplicates merged).

    Order-statistic edges commute with strictly increasing maps, which is what
    makes information gain invariant under monotone feature transforms.
    """
    qs = np.arange(1, num_bins) / num_bins
    edges = np.unique(np.quantile(x, qs, method="inverted_cdf"))
    return np.searchsorted(edges, x, side="right")


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def information_gain(ds: Dataset, num_bins: int = 10) -> ImportanceVector:
    """Entropy reduction of the label given each feature, discretized into at
    most ``num_bins`` equal-frequency bins (natural-log units).

    For regression the target is discretized with the same binning rule and
    treated as the label.
    """
    if num_bins < 2:
        raise ConfigError(f"num_bins={num_bins} must be >= 2")
    if ds.task == CLASSIFICATION:
        y = ds.target.astype(np.int64)
    else:
        y = _equal_frequency_bins(ds.target, num_bins)
    classes, y = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise DataError("information gain needs a target with >= 2 distinct values")
    h_y = _entropy(np.bincount(y))
    n = ds.n_rows
    scores = np.empty(ds.n_features)
    for j in range(ds.n_features):
        b = _equal_frequency_bins(ds.features[:, j], num_bins)
        joint = np.zeros((b.max() + 1, classes.size))
        np.add.at(joint, (b, y), 1.0)
        h_cond = sum((row.sum() / n) * _entropy(row) for row in joint)
        ig = h_y - h_cond
        scores[j] = 0.0 if -1e-12 <= ig <= 0.0 else ig
    return ImportanceVector("info_gain", scores)


def single_run_shap(ds: Dataset, params: GbdtParams, seed: int,
                    test_fraction: float = 0.3) -> ImportanceVector:
    """The standard one-shot workflow: one train/test split, one fit, and the
    per-feature sum of |SHAP| over the test rows."""
    stratified = ds.task == CLASSIFICATION
    train, test = train_test_split(ds, test_fraction, seed, stratified=stratified)
    ens = fit_gbdt(train, params, seed)
    a = np.abs(shap_matrix(ens, test.features))
    a[a <= ZERO_SNAP] = 0.0
    return ImportanceVector("single_shap", a.sum(axis=0))


def gain_importance_vector(ds: Dataset, params: GbdtParams, seed: int) -> ImportanceVector:
    """Model-gain importance of an ensemble fit on the full dataset."""
    ens = fit_gbdt(ds, params, seed)
    return ImportanceVector("gain", gain_importance(ens))
