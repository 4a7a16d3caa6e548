"""Exact per-instance SHAP values for tree ensembles on the margin scale.

The fast path is the polynomial-time unique-path algorithm with
cover-ratio weights (path-dependent conditional expectations). The
exponential coalition enumeration in ``brute_force_shapley`` exists as an
independent oracle: it evaluates the identical value function with exact
rational arithmetic and applies the Shapley formula directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from . import _kernels
from .errors import ConfigError, DataError, NumericError
from .trees import TreeEnsemble

BRUTE_FORCE_MAX_FEATURES = 20


@dataclass(frozen=True)
class Attribution:
    """Additive attribution for one instance: base + sum(phi) equals the
    prediction margin; features absent from every decision path carry an
    exact zero."""

    phi: np.ndarray
    base: float
    instance_id: int = -1


def expected_value(ens: TreeEnsemble) -> float:
    """Cover-weighted mean prediction: base plus each tree's recursive
    cover-weighted average of leaf values."""
    total = ens.base_score
    for t in ens.trees:
        if t.cover[0] <= 0.0:
            raise NumericError("zero cover at a tree root")
        # children of node i sit at larger indices, so a reverse sweep
        # folds leaf values up to the root without recursion
        e = t.value.astype(np.float64).copy()
        for i in range(t.n_nodes - 1, -1, -1):
            if t.feature[i] >= 0:
                lc, rc = t.left[i], t.right[i]
                e[i] = (t.cover[lc] * e[lc] + t.cover[rc] * e[rc]) / t.cover[i]
        total += e[0]
    return float(total)


def tree_shap(ens: TreeEnsemble, x: np.ndarray, instance_id: int = -1) -> Attribution:
    """Exact SHAP attribution of the margin prediction for one instance."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ens.n_features,):
        raise DataError(f"expected length-{ens.n_features} vector, got {x.shape}")
    if not np.isfinite(x).all():
        raise DataError("instance contains non-finite values")
    phi = shap_matrix(ens, x[None, :])[0]
    return Attribution(phi, expected_value(ens), instance_id)


def shap_matrix(ens: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """SHAP values for every row of X, shape (m, p). The shared base value is
    ``expected_value(ens)``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != ens.n_features:
        raise DataError(f"expected (m, {ens.n_features}) matrix, got {X.shape}")
    if not ens.trees:
        return np.zeros_like(X)
    off, fe, th, le, ri, va, co, maxd = ens.packed()
    return _kernels._shap_matrix(off, fe, th, le, ri, va, co, X, maxd)


def _coalition_values(ens: TreeEnsemble, x: np.ndarray) -> list[float]:
    """Value of every coalition S (indexed by bitmask): route x at splits on
    features in S, take the cover-weighted average of both children elsewhere."""
    p = ens.n_features

    def walk(t, node: int, mask: int) -> float:
        f = t.feature[node]
        if f < 0:
            return float(t.value[node])
        lc, rc = int(t.left[node]), int(t.right[node])
        if (mask >> f) & 1:
            child = lc if x[f] < t.threshold[node] else rc
            return walk(t, child, mask)
        cl = float(t.cover[lc])
        cr = float(t.cover[rc])
        return (cl * walk(t, lc, mask) + cr * walk(t, rc, mask)) / (cl + cr)

    return [ens.base_score + sum(walk(t, 0, mask) for t in ens.trees)
            for mask in range(1 << p)]


def _brute_force_exact(ens: TreeEnsemble, x: np.ndarray):
    """Shapley values with exact rational coalition weights.

    Coalition values (floats) are lifted exactly into Fractions, so the only
    rounding in the whole computation is the final float conversion; the
    efficiency axiom sum(phi) = v(full) - v(empty) holds exactly in rationals.
    Returns (phi as Fractions, v(empty), v(full)).
    """
    p = ens.n_features
    if p > BRUTE_FORCE_MAX_FEATURES:
        raise ConfigError(
            f"brute force enumerates 2^p coalitions; p={p} exceeds "
            f"{BRUTE_FORCE_MAX_FEATURES}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p,):
        raise DataError(f"expected length-{p} vector, got {x.shape}")
    v = [Fraction(val) for val in _coalition_values(ens, x)]
    fact = [factorial(k) for k in range(p + 1)]
    weight = [Fraction(fact[s] * fact[p - s - 1], fact[p]) for s in range(p)]
    phi = [Fraction(0)] * p
    full = (1 << p) - 1
    for mask in range(1 << p):
        s = bin(mask).count("1")
        for j in range(p):
            if not (mask >> j) & 1:
                phi[j] += weight[s] * (v[mask | (1 << j)] - v[mask])
    return phi, v[0], v[full]


def brute_force_shapley(ens: TreeEnsemble, x: np.ndarray,
                        instance_id: int = -1) -> Attribution:
    """Oracle Shapley attribution by full coalition enumeration (p <= 20)."""
    phi, v0, _ = _brute_force_exact(ens, x)
    return Attribution(np.array([float(f) for f in phi]), float(v0), instance_id)


def write_attribution_csv(path, instance_ids, phi: np.ndarray, base: float,
                          feature_names) -> None:
    """Per-instance attribution dump: one (instance_id, feature, phi) row per
    feature plus one (instance_id, "__base__", base) row per instance."""
    import csv

    phi = np.asarray(phi, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "feature", "phi"])
        for row, inst in enumerate(instance_ids):
            writer.writerow([int(inst), "__base__", repr(float(base))])
            for j, name in enumerate(feature_names):
                writer.writerow([int(inst), name, repr(float(phi[row, j]))])
