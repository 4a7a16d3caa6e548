"""Feature-selection benchmark: select top-k per method, refit the same
fixed-parameter model on the same train/test split, score held-out data,
and sweep k.

The metric computations are deliberately written as plain sequential loops:
they double as the reference definitions the tests compare against, and the
evaluation sets are small enough that clarity wins.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attribution import RankingTable
from .baselines import METHODS, ImportanceVector
from .dataset import CLASSIFICATION, REGRESSION, Dataset, train_test_split
from .errors import ConfigError, DataError
from .trees import GbdtParams, fit_gbdt, predict_proba_many

MAPE_MIN_ABS = 1e-8


@dataclass(frozen=True)
class EvalConfig:
    k_values: tuple[int, ...]
    methods: tuple[str, ...] = METHODS
    test_fraction: float = 0.3
    params: GbdtParams = field(default_factory=GbdtParams)
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ConfigError("k_values must be a nonempty list of positive integers")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}, expected one of {METHODS}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction={self.test_fraction} outside (0, 1)")


@dataclass(frozen=True)
class MetricReport:
    """Held-out scores in their natural ranges; classification and regression
    fill disjoint field sets. ``mape`` is None when every row was excluded by
    the |y| > 1e-8 guard; ``f1_zero_division`` flags the undefined-F1 -> 0
    convention having fired for some class."""

    task: str
    accuracy: float | None = None
    macro_f1: float | None = None
    average_precision: float | None = None
    auc_roc: float | None = None
    rmse: float | None = None
    mae: float | None = None
    mape: float | None = None
    mape_excluded: int = 0
    f1_zero_division: bool = False

    def metric(self, name: str) -> float | None:
        return getattr(self, name)


CLASSIFICATION_METRICS = ("accuracy", "macro_f1", "average_precision", "auc_roc")
REGRESSION_METRICS = ("rmse", "mae", "mape")


def classification_metrics(y_true, scores, threshold: float = 0.5) -> MetricReport:
    """Accuracy and macro-F1 from thresholded scores, AUC by Mann-Whitney
    pair counting with ties worth 1/2, and AP as the area of the
    descending-score precision-recall staircase."""
    y = [float(v) for v in y_true]
    s = [float(v) for v in scores]
    if len(y) != len(s) or not y:
        raise DataError("y_true and scores must be equal-length and nonempty")
    n_pos = sum(1 for v in y if v == 1.0)
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("classification metrics need both classes in y_true")

    correct = 0
    tp = {0.0: 0, 1.0: 0}
    fp = {0.0: 0, 1.0: 0}
    fn = {0.0: 0, 1.0: 0}
    for yi, si in zip(y, s):
        pred = 1.0 if si >= threshold else 0.0
        if pred == yi:
            correct += 1
            tp[yi] += 1
        else:
            fp[pred] += 1
            fn[yi] += 1
    accuracy = correct / len(y)

    zero_division = False
    f1s = []
    for cls in (0.0, 1.0):
        denom = 2 * tp[cls] + fp[cls] + fn[cls]
        if denom == 0:
            f1s.append(0.0)
            zero_division = True
        else:
            f1s.append(2 * tp[cls] / denom)
    macro_f1 = (f1s[0] + f1s[1]) / 2

    # AUC: group equal scores ascending; all counts stay integers so the
    # single final division is reproducible bit for bit.
    order = sorted(range(len(s)), key=lambda i: s[i])
    concordant = 0
    tied = 0
    negs_below = 0
    i = 0
    while i < len(order):
        j = i
        gp = gn = 0
        while j < len(order) and s[order[j]] == s[order[i]]:
            if y[order[j]] == 1.0:
                gp += 1
            else:
                gn += 1
            j += 1
        concordant += gp * negs_below
        tied += gp * gn
        negs_below += gn
        i = j
    auc = (2 * concordant + tied) / (2 * n_pos * n_neg)

    # AP over distinct thresholds, descending.
    desc = sorted(range(len(s)), key=lambda i: -s[i])
    ap = 0.0
    r_prev = 0.0
    ctp = cfp = 0
    i = 0
    while i < len(desc):
        j = i
        while j < len(desc) and s[desc[j]] == s[desc[i]]:
            if y[desc[j]] == 1.0:
                ctp += 1
            else:
                cfp += 1
            j += 1
        r = ctp / n_pos
        p = ctp / (ctp + cfp)
        ap += (r - r_prev) * p
        r_prev = r
        i = j
    return MetricReport(CLASSIFICATION, accuracy=accuracy, macro_f1=macro_f1,
                        average_precision=ap, auc_roc=auc,
                        f1_zero_division=zero_division)


def regression_metrics(y_true, y_pred) -> MetricReport:
    """RMSE, MAE, and MAPE (rows with |y| <= 1e-8 are excluded from MAPE and
    counted; all-excluded leaves MAPE absent)."""
    y = [float(v) for v in y_true]
    f = [float(v) for v in y_pred]
    if len(y) != len(f) or not y:
        raise DataError("y_true and y_pred must be equal-length and nonempty")
    sq = 0.0
    ab = 0.0
    pe = 0.0
    used = 0
    for yi, fi in zip(y, f):
        d = yi - fi
        sq += d * d
        ab += abs(d)
        if abs(yi) > MAPE_MIN_ABS:
            pe += abs(d / yi)
            used += 1
    rmse = math.sqrt(sq / len(y))
    mae = ab / len(y)
    mape = pe / used if used else None
    return MetricReport(REGRESSION, rmse=rmse, mae=mae, mape=mape,
                        mape_excluded=len(y) - used)


def top_k_features(importance, k: int) -> list[int]:
    """Top-k feature indices from an ImportanceVector or RankingTable,
    returned in ascending original order so refits see columns in the same
    order as the full-feature model."""
    if isinstance(importance, RankingTable):
        feats = importance.top_features(k)
    elif isinstance(importance, ImportanceVector):
        feats = importance.ranking().top_features(k)
    else:
        raise ConfigError(f"unsupported importance object {type(importance).__name__}")
    if k > len(feats):
        raise ConfigError(f"k={k} exceeds the {len(feats)} ranked features")
    return sorted(feats)


def evaluate_topk(ds: Dataset, importance, k: int, cfg: EvalConfig) -> MetricReport:
    """Refit the fixed-parameter model on the top-k columns and score the
    held-out side. The row partition depends only on (seed, fraction, target),
    so every method and every k sees the identical split."""
    if k > ds.n_features:
        raise ConfigError(f"k={k} exceeds p={ds.n_features}")
    cols = top_k_features(importance, k)
    stratified = ds.task == CLASSIFICATION
    train, test = train_test_split(ds, cfg.test_fraction, cfg.master_seed,
                                   stratified=stratified)
    train_k = train.select_columns(cols)
    test_k = test.select_columns(cols)
    ens = fit_gbdt(train_k, cfg.params, cfg.master_seed)
    if ds.task == CLASSIFICATION:
        return classification_metrics(test_k.target,
                                      predict_proba_many(ens, test_k.features))
    return regression_metrics(test_k.target, ens.predict_margins(test_k.features))


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    metric: str
    mean: float
    sd: float
    k_count: int


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]
    cells: dict[tuple[str, int], MetricReport]
    k_values: tuple[int, ...]

    def row(self, method: str, metric: str) -> ComparisonRow:
        for r in self.rows:
            if r.method == method and r.metric == metric:
                return r
        raise KeyError((method, metric))


def sweep(ds: Dataset, rankings: dict, cfg: EvalConfig,
          workers: int = 1) -> ComparisonTable:
    """Evaluate every (method, k) cell and aggregate each metric's mean and
    population SD across the k grid. Error bars in the emitted charts show
    this SD, so a single k yields 0."""
    for m in cfg.methods:
        if m not in rankings:
            raise ConfigError(f"no ranking supplied for method {m!r}")
    grid = [(m, k) for m in cfg.methods for k in cfg.k_values]

    def cell(mk):
        m, k = mk
        return evaluate_topk(ds, rankings[m], k, cfg)

    if workers == 1:
        reports = [cell(mk) for mk in grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(cell, grid))
    cells = dict(zip(grid, reports))

    metric_names = CLASSIFICATION_METRICS if ds.task == CLASSIFICATION \
        else REGRESSION_METRICS
    rows = []
    for m in cfg.methods:
        for name in metric_names:
            vals = [cells[(m, k)].metric(name) for k in cfg.k_values]
            vals = [v for v in vals if v is not None]
            if not vals:
                continue
            arr = np.asarray(vals)
            rows.append(ComparisonRow(m, name, float(arr.mean()),
                                      float(arr.std(ddof=0)), len(vals)))
    return ComparisonTable(rows, cells, cfg.k_values)


def write_comparison_csv(table: ComparisonTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "metric", "mean", "sd", "k_count"])
        for r in table.rows:
            writer.writerow([r.method, r.metric, repr(r.mean), repr(r.sd), r.k_count])
