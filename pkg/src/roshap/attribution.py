"""Bootstrap orchestration: refit the model on resamples, aggregate
out-of-bag SHAP magnitudes per feature, summarize each feature's sampling
distribution with a zero-inflated model, run Gaussian-approximation
diagnostics, and compute the RoSHAP ranking score.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .dataset import Dataset, bootstrap_resample, derive_run_seed
from .errors import ConfigError, DataError, NumericError
from .trees import GbdtParams, fit_gbdt
from .treeshap import expected_value, shap_matrix, write_attribution_csv

# |phi| at or below this snaps to exact zero before aggregation: the path
# algorithm produces structural zeros, but float summation across trees can
# leave dust that would break the zero-inflated semantics.
ZERO_SNAP = 1e-12


@dataclass(frozen=True)
class AttributionRun:
    """One bootstrap run's aggregated attribution magnitudes.

    ``U[j] = (n / oob_size) * sum over OOB rows of |phi_ij|`` (snapped), so
    runs with different OOB sizes are comparable to each other and to the
    full-sample theory. ``per_sample_abs`` optionally maps a feature index to
    a length-n vector of raw (unrescaled) |phi| values, NaN on in-bag rows.
    """

    run_id: int
    oob_size: int
    U: np.ndarray
    zero_flag: np.ndarray
    per_sample_abs: dict[int, np.ndarray] | None = None


@dataclass
class FeatureDistributionSummary:
    """Zero-inflated summary of one feature's U samples across runs.

    Moment diagnostics (skewness, excess kurtosis, normality_stat) describe
    the nonzero subsample and need at least ``MIN_MOMENT_COUNT`` nonzero
    values, else they are None. lyapunov_ratio / max_var_share are filled
    only when per-sample attributions were retained.
    """

    feature: int
    p_zero: float
    median_nonzero: float
    sd_all: float
    mean_all: float
    skewness: float | None = None
    excess_kurtosis: float | None = None
    normality_stat: float | None = None
    lyapunov_ratio: float | None = None
    max_var_share: float | None = None
    kde: "GaussianKde | None" = None


@dataclass(frozen=True)
class ZeroInflatedMoments:
    """Closed-form mean/variance of a sum of independent zero-inflated terms:
    mu = sum (1-w_i) E(H_i), s2 = sum (1-w_i) Var(H_i) + w_i (1-w_i) E(H_i)^2."""

    mu: float
    s2: float
    w: np.ndarray = field(repr=False, default=None)
    eh: np.ndarray = field(repr=False, default=None)
    vh: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class LyapunovDiagnostic:
    """Third-moment-to-variance diagnostic for the Gaussian approximation.

    ``ratio`` is the delta=1 Lyapunov quotient estimate; ``max_var_share``
    the largest single-observation share of the total variance. Small values
    of both mean no single term dominates and a mean/SD summary is safe.
    """

    ratio: float
    max_var_share: float
    n_observations: int
    gaussian_recommended: bool


MIN_MOMENT_COUNT = 8


def run_bootstrap_attribution(ds: Dataset, params: GbdtParams, B: int,
                              master_seed: int, workers: int = 1,
                              keep_samples=None,
                              stratified_bootstrap: bool = False,
                              attribution_dump_dir=None,
                              feature_names=None) -> list[AttributionRun]:
    """Execute B bootstrap refit+attribute runs.

    Each run derives its own seed from (master_seed, b), so results are
    byte-identical regardless of worker count or scheduling. ``keep_samples``
    is None, "all", or a sequence of feature indices whose raw per-row |phi|
    values are retained for diagnostics (memory: B x n per feature).
    ``attribution_dump_dir`` additionally writes each run's raw out-of-bag
    attributions as attributions_run<b>.csv (large: one row per OOB row per
    feature).
    """
    if B < 1:
        raise ConfigError(f"B={B} must be >= 1")
    if workers < 1:
        raise ConfigError(f"workers={workers} must be >= 1")
    if keep_samples is None:
        kept: tuple[int, ...] = ()
    elif isinstance(keep_samples, str):
        if keep_samples != "all":
            raise ConfigError(f"keep_samples={keep_samples!r}: expected 'all', None, "
                              "or a sequence of feature indices")
        kept = tuple(range(ds.n_features))
    else:
        kept = tuple(int(j) for j in keep_samples)
        if any(j < 0 or j >= ds.n_features for j in kept):
            raise ConfigError("keep_samples index out of range")

    n = ds.n_rows

    def one_run(b: int) -> AttributionRun:
        try:
            seed_b = derive_run_seed(master_seed, b)
            split = bootstrap_resample(ds, seed_b, run_id=b,
                                       stratified=stratified_bootstrap)
            train = ds.select_rows(split.train_indices)
            ens = fit_gbdt(train, params, seed_b)
            phi = shap_matrix(ens, ds.features[split.oob_indices])
            if attribution_dump_dir is not None:
                names = feature_names or ds.feature_names
                write_attribution_csv(
                    os.path.join(attribution_dump_dir, f"attributions_run{b}.csv"),
                    split.oob_indices, phi, expected_value(ens), names)
            a = np.abs(phi)
            a[a <= ZERO_SNAP] = 0.0
            U = (n / split.oob_indices.size) * a.sum(axis=0)
            samples = None
            if kept:
                samples = {}
                for j in kept:
                    col = np.full(n, np.nan)
                    col[split.oob_indices] = a[:, j]
                    samples[j] = col
            return AttributionRun(b, split.oob_indices.size, U, U == 0.0, samples)
        except Exception as e:
            raise type(e)(f"bootstrap run {b}: {e}") from e

    ids = range(1, B + 1)
    if workers == 1:
        return [one_run(b) for b in ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one_run, ids))


def u_matrix(runs: list[AttributionRun]) -> np.ndarray:
    """Stack run U vectors into a (B, p) matrix ordered by run_id."""
    return np.vstack([r.U for r in sorted(runs, key=lambda r: r.run_id)])


def summarize_feature(values: np.ndarray, feature: int = -1) -> FeatureDistributionSummary:
    """Zero-inflation, nonzero median, full-sample SD, and nonzero-subsample
    moment diagnostics for one feature's B attribution samples.

    p_zero, the median, the mean, and the SD use plain sequential arithmetic
    (counts, sorted-middle, left-to-right sums with the B-1 denominator), so
    an independent naive pass reproduces them bit for bit.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("summarize_feature: empty input")
    if (values < 0).any():
        raise DataError("aggregated attribution magnitudes must be >= 0")
    B = values.size
    vals = values.tolist()
    nz = sorted(v for v in vals if v > 0.0)
    p_zero = (B - len(nz)) / B
    if not nz:
        median_nonzero = 0.0
    elif len(nz) % 2:
        median_nonzero = nz[len(nz) // 2]
    else:
        median_nonzero = (nz[len(nz) // 2 - 1] + nz[len(nz) // 2]) / 2
    sum_ = 0.0
    for v in vals:
        sum_ += v
    mean_all = sum_ / B
    sd_all = 0.0
    if B >= 2:
        ss = 0.0
        for v in vals:
            d = v - mean_all
            ss += d * d
        sd_all = math.sqrt(ss / (B - 1))
    nonzero = values[values > 0.0]
    out = FeatureDistributionSummary(
        feature=feature, p_zero=p_zero, median_nonzero=median_nonzero,
        sd_all=sd_all, mean_all=mean_all)
    if nonzero.size >= MIN_MOMENT_COUNT:
        m = nonzero.mean()
        c = nonzero - m
        m2 = float(np.mean(c ** 2))
        if m2 > 0.0:
            out.skewness = float(np.mean(c ** 3)) / m2 ** 1.5
            out.excess_kurtosis = float(np.mean(c ** 4)) / m2 ** 2 - 3.0
            sd_nz = float(np.std(nonzero, ddof=1))
            out.normality_stat = kolmogorov_distance((nonzero - m) / sd_nz)
    if np.unique(nonzero).size >= 2:
        out.kde = GaussianKde(nonzero)
    return out


def summarize_runs(runs: list[AttributionRun],
                   dominance_threshold: float = 0.5) -> list[FeatureDistributionSummary]:
    """Per-feature summaries for a full set of bootstrap runs, with Lyapunov
    diagnostics attached for whichever features retained per-sample values."""
    U = u_matrix(runs)
    summaries = [summarize_feature(U[:, j], feature=j) for j in range(U.shape[1])]
    retained: set[int] | None = None
    for r in runs:
        kept = set(r.per_sample_abs) if r.per_sample_abs else set()
        retained = kept if retained is None else retained & kept
    for j in retained or set():
        try:
            diag = lyapunov_diagnostic(per_sample_matrix(runs, j),
                                       dominance_threshold=dominance_threshold)
        except NumericError:
            continue
        summaries[j].lyapunov_ratio = diag.ratio
        summaries[j].max_var_share = diag.max_var_share
    return summaries


def kolmogorov_distance(standardized: np.ndarray) -> float:
    """Sup distance between the empirical CDF of the samples and the standard
    normal CDF."""
    z = np.sort(np.asarray(standardized, dtype=np.float64))
    m = z.size
    cdf = ndtr(z)
    upper = np.arange(1, m + 1) / m - cdf
    lower = cdf - np.arange(0, m) / m
    return float(max(upper.max(), lower.max()))


def roshap_score(s: FeatureDistributionSummary) -> float:
    """The robust ranking score (1 - P0) * median^2 / SD.

    Fully inactive features score 0; a zero SD is floored at 1e-6 * median so
    the score stays finite and rankings total.
    """
    if s.p_zero >= 1.0:
        return 0.0
    denom = max(s.sd_all, 1e-6 * s.median_nonzero)
    return (1.0 - s.p_zero) * s.median_nonzero ** 2 / denom


def zero_inflated_moments(w, eh, vh) -> ZeroInflatedMoments:
    """Mean and variance of sum_i (1 - B_i) H_i with B_i ~ Bernoulli(w_i)
    independent of H_i, via the law of total variance."""
    w = np.asarray(w, dtype=np.float64)
    eh = np.asarray(eh, dtype=np.float64)
    vh = np.asarray(vh, dtype=np.float64)
    if not (w.shape == eh.shape == vh.shape) or w.ndim != 1:
        raise DataError("w, eh, vh must be equal-length vectors")
    if ((w < 0) | (w > 1)).any():
        raise DataError("zero probabilities w must lie in [0, 1]")
    if (vh < 0).any():
        raise DataError("variances vh must be >= 0")
    mu = float(np.sum((1.0 - w) * eh))
    s2 = float(np.sum((1.0 - w) * vh) + np.sum(w * (1.0 - w) * eh ** 2))
    return ZeroInflatedMoments(mu, s2, w, eh, vh)


def per_sample_matrix(runs: list[AttributionRun], feature: int) -> np.ndarray:
    """(B, n) matrix of raw per-row |phi| for one feature; NaN marks rows that
    were in-bag for that run."""
    ordered = sorted(runs, key=lambda r: r.run_id)
    cols = []
    for r in ordered:
        if r.per_sample_abs is None or feature not in r.per_sample_abs:
            raise NumericError(
                f"per-sample attributions for feature {feature} were not retained")
        cols.append(r.per_sample_abs[feature])
    return np.vstack(cols)


def per_sample_moment_estimates(runs: list[AttributionRun], feature: int):
    """Estimate per-observation zero-inflation parameters (w_i, E H_i, Var H_i)
    on the scale on which U aggregates.

    Each run's raw |phi| values are rescaled by n/oob_size and in-bag rows
    count as structural zeros, so U^{(b)} = sum_i t_i^{(b)} holds exactly and
    the plug-in moment formulas target the mean/SD of the stored U samples.
    Var uses the population (1/B) convention, matching the law-of-total-
    variance identity the formulas come from.
    """
    M = per_sample_matrix(runs, feature)  # (B, n) raw, NaN = in-bag
    ordered = sorted(runs, key=lambda r: r.run_id)
    n = M.shape[1]
    factors = np.array([n / r.oob_size for r in ordered])
    T = np.where(np.isnan(M), 0.0, M) * factors[:, None]
    B = T.shape[0]
    nz = T > 0.0
    cnt = nz.sum(axis=0)
    w = 1.0 - cnt / B
    tot = T.sum(axis=0)
    with np.errstate(invalid="ignore"):
        eh = np.where(cnt > 0, tot / np.maximum(cnt, 1), 0.0)
        sq = (T ** 2).sum(axis=0)
        vh = np.where(cnt > 0, sq / np.maximum(cnt, 1) - eh ** 2, 0.0)
    vh = np.maximum(vh, 0.0)
    return w, eh, vh


def lyapunov_diagnostic(per_obs: np.ndarray, min_runs: int = MIN_MOMENT_COUNT,
                        dominance_threshold: float = 0.5) -> LyapunovDiagnostic:
    """Estimate the delta=1 Lyapunov quotient and the largest per-observation
    variance share from retained per-sample attributions.

    ``per_obs`` is (B, n) with NaN for unobserved (in-bag) entries. Central
    moments are estimated per observation across its observed runs; the ratio
    sums third absolute central moments over (total variance)^{3/2}. A large
    ``max_var_share`` means one observation dominates the variance and the
    Gaussian summary is not recommended.
    """
    per_obs = np.asarray(per_obs, dtype=np.float64)
    if per_obs.ndim != 2:
        raise DataError("expected a (B, n) matrix of per-observation values")
    observed = ~np.isnan(per_obs)
    counts = observed.sum(axis=0)
    if counts.min() < min_runs:
        raise NumericError(
            f"insufficient runs: an observation has {int(counts.min())} retained "
            f"values, need >= {min_runs}")
    filled = np.where(observed, per_obs, 0.0)
    means = filled.sum(axis=0) / counts
    c = np.where(observed, per_obs - means, 0.0)
    var_i = (c ** 2).sum(axis=0) / counts
    m3_i = (np.abs(c) ** 3).sum(axis=0) / counts
    svar = float(var_i.sum())
    if svar <= 0.0:
        return LyapunovDiagnostic(0.0, 0.0, per_obs.shape[1], True)
    ratio = float(m3_i.sum() / svar ** 1.5)
    share = float(var_i.max() / svar)
    return LyapunovDiagnostic(ratio, share, per_obs.shape[1],
                              share <= dominance_threshold)


class GaussianKde:
    """Gaussian-kernel density with the Silverman bandwidth
    0.9 * min(sd, IQR/1.34) * m^(-1/5), floored at 1e-9 * range."""

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.size < 2:
            raise DataError("KDE needs at least 2 samples")
        if not np.isfinite(samples).all():
            raise DataError("KDE samples must be finite")
        lo, hi = float(samples.min()), float(samples.max())
        if lo == hi:
            raise NumericError(
                "all KDE samples identical: distribution is a point mass")
        sd = float(np.std(samples, ddof=1))
        q75, q25 = np.percentile(samples, [75, 25])
        m = samples.size
        bw = 0.9 * min(sd, (q75 - q25) / 1.34) * m ** (-0.2)
        self.bandwidth = max(bw, 1e-9 * (hi - lo))
        self.samples = samples
        self.support = (lo, hi)

    def __call__(self, grid) -> np.ndarray:
        grid = np.atleast_1d(np.asarray(grid, dtype=np.float64))
        z = (grid[:, None] - self.samples[None, :]) / self.bandwidth
        dens = np.exp(-0.5 * z ** 2).sum(axis=1)
        return dens / (self.samples.size * self.bandwidth * math.sqrt(2.0 * math.pi))


def kde_density(nonzero_samples, grid) -> np.ndarray:
    """Evaluate the Silverman-bandwidth Gaussian KDE of the samples on a grid."""
    return GaussianKde(nonzero_samples)(grid)


@dataclass(frozen=True)
class RankingRow:
    rank: int
    feature: int
    name: str
    score: float
    summary: FeatureDistributionSummary


@dataclass
class RankingTable:
    """Features ordered by descending score; the artifact's principal output."""

    rows: list[RankingRow]
    method: str = "roshap"

    def top_features(self, k: int) -> list[int]:
        return [r.feature for r in self.rows[:k]]

    def rank_of(self, feature: int) -> int:
        for r in self.rows:
            if r.feature == feature:
                return r.rank
        raise KeyError(feature)


CSV_HEADER = ("rank", "feature", "roshap", "p0_percent", "median_nonzero", "sd",
              "mean", "skewness", "normality_stat", "lyapunov_ratio",
              "max_var_share", "method")


def rank_features(summaries: list[FeatureDistributionSummary],
                  feature_names=None) -> RankingTable:
    """Order features by descending RoSHAP; ties break to lower zero rate,
    then higher nonzero median, then lower feature index."""
    def key(s: FeatureDistributionSummary):
        return (-roshap_score(s), s.p_zero, -s.median_nonzero, s.feature)

    rows = []
    for rank, s in enumerate(sorted(summaries, key=key), start=1):
        name = feature_names[s.feature] if feature_names else str(s.feature)
        rows.append(RankingRow(rank, s.feature, name, roshap_score(s), s))
    return RankingTable(rows)


def write_ranking_csv(table: RankingTable, path) -> None:
    """Ranking CSV; zero rates are presented as percentages with 2 decimals.
    Diagnostic cells are blank when unavailable. Baseline tables reuse the
    schema with their score in the roshap column and distribution cells blank.
    """
    def cell(v):
        return "" if v is None else repr(float(v))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in table.rows:
            s = r.summary
            if s is not None:
                writer.writerow([r.rank, r.name, repr(r.score),
                                 f"{100.0 * s.p_zero:.2f}", repr(s.median_nonzero),
                                 repr(s.sd_all), repr(s.mean_all), cell(s.skewness),
                                 cell(s.normality_stat), cell(s.lyapunov_ratio),
                                 cell(s.max_var_share), table.method])
            else:
                writer.writerow([r.rank, r.name, repr(r.score), "", "", "", "",
                                 "", "", "", "", table.method])


def write_u_dump(runs: list[AttributionRun], feature_names, path) -> None:
    """Per-run dump of the aggregated magnitudes: one row per bootstrap run,
    one column per feature, preceded by run_id and oob_size."""
    ordered = sorted(runs, key=lambda r: r.run_id)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "oob_size"] + list(feature_names))
        for r in ordered:
            writer.writerow([r.run_id, r.oob_size] + [repr(float(v)) for v in r.U])


def read_u_dump(path) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Inverse of write_u_dump: returns (U matrix, feature names, oob sizes)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["run_id", "oob_size"]:
            raise DataError(f"{path}: not a U dump (header {header[:2]})")
        names = header[2:]
        rows, oob = [], []
        for row in reader:
            oob.append(int(row[1]))
            rows.append([float(v) for v in row[2:]])
    return np.asarray(rows), names, np.asarray(oob, dtype=np.int64)


def write_per_sample_dump(runs: list[AttributionRun], feature: int,
                          feature_name: str, path) -> None:
    """Long-form per-sample dump for one retained feature:
    (run_id, row_index, abs_shap) for every out-of-bag row."""
    ordered = sorted(runs, key=lambda r: r.run_id)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "row_index", f"abs_shap_{feature_name}"])
        for r in ordered:
            col = per_sample_matrix([r], feature)[0]
            for i in np.flatnonzero(~np.isnan(col)):
                writer.writerow([r.run_id, int(i), repr(float(col[i]))])


def read_per_sample_dump(path, n_rows: int) -> np.ndarray:
    """Inverse of write_per_sample_dump: (B, n) matrix with NaN for in-bag
    rows, run rows ordered by run_id."""
    by_run: dict[int, list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for run_id, idx, val in reader:
            by_run.setdefault(int(run_id), []).append((int(idx), float(val)))
    out = np.full((len(by_run), n_rows), np.nan)
    for k, run_id in enumerate(sorted(by_run)):
        for i, v in by_run[run_id]:
            out[k, i] = v
    return out
