"""Gradient-boosted decision trees with second-order (Newton) boosting,
binary logistic and squared-error objectives, and model-gain importance.

Leaf values are stored post-shrinkage: the prediction margin is
``base_score + sum of per-tree leaf outputs`` with no further scaling.
The JSON model dump records the same convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import _kernels
from .dataset import CLASSIFICATION, Dataset
from .errors import ConfigError, DataError

LOGISTIC = "logistic"
SQUARED_ERROR = "squared-error"

_OBJ_CODE = {LOGISTIC: _kernels.LOGISTIC, SQUARED_ERROR: _kernels.SQUARED_ERROR}


@dataclass(frozen=True)
class GbdtParams:
    num_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    lambda_l2: float = 1.0
    min_child_weight: float = 1.0
    min_gain: float = 0.0

    def __post_init__(self):
        if self.num_rounds < 1 or self.max_depth < 1:
            raise ConfigError("num_rounds and max_depth must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate={self.learning_rate} outside (0, 1]")
        if self.lambda_l2 < 0 or self.min_child_weight < 0 or self.min_gain < 0:
            raise ConfigError("lambda_l2, min_child_weight, min_gain must be >= 0")


@dataclass(frozen=True)
class Tree:
    """One decision tree as flat node arrays, node 0 the root.

    ``feature[i] == -1`` marks a leaf; internal nodes route rows by
    ``x[feature] < threshold -> left``. ``cover`` is the hessian sum of the
    training rows reaching each node; ``gain`` the split gain at internal
    nodes (training metadata, not part of the serialized model).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        best = 0
        for i in range(self.n_nodes):
            if self.left[i] >= 0:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
            else:
                best = max(best, int(d[i]))
        return best

    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())


@dataclass
class TreeEnsemble:
    trees: list[Tree]
    base_score: float
    learning_rate: float
    objective: str
    n_features: int
    train_loss_curve: np.ndarray | None = None
    train_total_gain: float | None = None
    _packed: tuple | None = field(default=None, repr=False, compare=False)

    def packed(self) -> tuple:
        """Flat concatenated node arrays for the numba kernels
        (tree offsets, feature, threshold, left, right, value, cover, max depth)."""
        if self._packed is None:
            sizes = [t.n_nodes for t in self.trees]
            off = np.zeros(len(sizes) + 1, dtype=np.int64)
            off[1:] = np.cumsum(sizes)
            if self.trees:
                cat = lambda name: np.ascontiguousarray(
                    np.concatenate([getattr(t, name) for t in self.trees]))
                packed = (off, cat("feature"), cat("threshold"), cat("left"),
                          cat("right"), cat("value"), cat("cover"),
                          max(t.depth() for t in self.trees))
            else:
                packed = (off, np.empty(0, np.int32), np.empty(0, np.float64),
                          np.empty(0, np.int32), np.empty(0, np.int32),
                          np.empty(0, np.float64), np.empty(0, np.float64), 0)
            self._packed = packed
        return self._packed

    def predict_margins(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DataError(f"expected (m, {self.n_features}) matrix, got {X.shape}")
        if not self.trees:
            return np.full(X.shape[0], self.base_score)
        off, fe, th, le, ri, va, co, maxd = self.packed()
        return _kernels._predict_margins(off, fe, th, le, ri, va, self.base_score, X)


def fit_gbdt(ds: Dataset, params: GbdtParams, seed: int = 0,
             objective: str | None = None) -> TreeEnsemble:
    """Train a boosted ensemble with exact greedy splits.

    Candidate thresholds are midpoints of consecutive distinct sorted values;
    equal-gain ties break to the lowest feature index, then lowest threshold.
    Training is fully deterministic for fixed inputs; ``seed`` is accepted for
    interface uniformity (the trainer has no stochastic components).
    """
    if objective is None:
        objective = LOGISTIC if ds.task == CLASSIFICATION else SQUARED_ERROR
    if objective not in _OBJ_CODE:
        raise ConfigError(f"unknown objective {objective!r}")
    y = ds.target
    if objective == LOGISTIC:
        if not np.isin(np.unique(y), (0.0, 1.0)).all():
            raise DataError("logistic objective requires a binary 0/1 target")
        ybar = float(y.mean())
        if ybar <= 0.0 or ybar >= 1.0:
            raise DataError("logistic objective requires both classes present")
        base_score = float(np.log(ybar / (1.0 - ybar)))
    else:
        base_score = float(y.mean())

    Xt = np.ascontiguousarray(ds.features.T)
    sorted_idx = np.ascontiguousarray(
        np.argsort(Xt, axis=1, kind="stable").astype(np.int32))
    feats, thrs, lefts, rights, vals, covs, gains, _margins, loss_curve = _kernels._boost(
        Xt, sorted_idx, np.ascontiguousarray(y), base_score, _OBJ_CODE[objective],
        params.num_rounds, params.max_depth, params.lambda_l2,
        params.min_child_weight, params.min_gain, params.learning_rate)
    trees = [Tree(fe, th, le, ri, va, co, ga)
             for fe, th, le, ri, va, co, ga in
             zip(feats, thrs, lefts, rights, vals, covs, gains)]
    total_gain = float(sum(t.gain[t.feature >= 0].sum() for t in trees))
    return TreeEnsemble(trees, base_score, params.learning_rate, objective,
                        ds.n_features, np.asarray(loss_curve), total_gain)


def predict_margin(ens: TreeEnsemble, x: np.ndarray) -> float:
    """Route one instance through every tree and sum leaf outputs onto the base."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ens.n_features,):
        raise DataError(f"expected length-{ens.n_features} vector, got {x.shape}")
    if not np.isfinite(x).all():
        raise DataError("instance contains non-finite values")
    return float(ens.predict_margins(x[None, :])[0])


def predict_proba(ens: TreeEnsemble, x: np.ndarray) -> float:
    if ens.objective != LOGISTIC:
        raise ConfigError("predict_proba requires a logistic-objective model")
    return float(expit(predict_margin(ens, x)))


def predict_proba_many(ens: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    if ens.objective != LOGISTIC:
        raise ConfigError("predict_proba requires a logistic-objective model")
    return expit(ens.predict_margins(X))


def gain_importance(ens: TreeEnsemble) -> np.ndarray:
    """Per-feature sum of split gains over all internal nodes of all trees.

    Features never chosen by a split score exactly 0.
    """
    scores = np.zeros(ens.n_features)
    for t in ens.trees:
        internal = t.feature >= 0
        if np.isnan(t.gain[internal]).any():
            raise ConfigError(
                "gain importance needs a freshly trained ensemble; "
                "split gains are training metadata and are not serialized")
        np.add.at(scores, t.feature[internal], t.gain[internal])
    return scores


def dump_model(ens: TreeEnsemble) -> str:
    """Serialize to the stable JSON schema. Floats use shortest round-trip
    decimals, so dump -> load -> dump is byte-identical."""
    trees = []
    for t in ens.trees:
        nodes = []
        for i in range(t.n_nodes):
            if t.feature[i] >= 0:
                nodes.append({"id": i, "kind": "internal",
                              "feature": int(t.feature[i]),
                              "threshold": float(t.threshold[i]),
                              "left": int(t.left[i]), "right": int(t.right[i]),
                              "cover": float(t.cover[i])})
            else:
                nodes.append({"id": i, "kind": "leaf",
                              "value": float(t.value[i]),
                              "cover": float(t.cover[i])})
        trees.append({"nodes": nodes})
    doc = {"objective": ens.objective, "base_score": ens.base_score,
           "learning_rate": ens.learning_rate, "n_features": ens.n_features,
           "leaf_values": "post-shrinkage", "trees": trees}
    return json.dumps(doc, indent=1)


def load_model(text: str) -> TreeEnsemble:
    """Inverse of dump_model. Training metadata (gains, loss curve) is not
    part of the dump and comes back absent."""
    doc = json.loads(text)
    trees = []
    for tdoc in doc["trees"]:
        nodes = tdoc["nodes"]
        m = len(nodes)
        fe = np.full(m, -1, np.int32)
        th = np.zeros(m, np.float64)
        le = np.full(m, -1, np.int32)
        ri = np.full(m, -1, np.int32)
        va = np.zeros(m, np.float64)
        co = np.zeros(m, np.float64)
        ga = np.full(m, np.nan, np.float64)
        for nd in nodes:
            i = nd["id"]
            co[i] = nd["cover"]
            if nd["kind"] == "internal":
                fe[i] = nd["feature"]
                th[i] = nd["threshold"]
                le[i] = nd["left"]
                ri[i] = nd["right"]
            else:
                va[i] = nd["value"]
        trees.append(Tree(fe, th, le, ri, va, co, ga))
    return TreeEnsemble(trees, float(doc["base_score"]), float(doc["learning_rate"]),
                        doc["objective"], int(doc["n_features"]))
