"""SVG report emission: per-feature attribution histograms with KDE and
fitted-Gaussian overlays, and grouped benchmark bars with error bars."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .attribution import FeatureDistributionSummary  # noqa: E402
from .evalharness import ComparisonTable  # noqa: E402

_METHOD_COLORS = {"roshap": "#7b3294", "single_shap": "#2c7bb6",
                  "gain": "#fdae61", "info_gain": "#d7191c"}


def feature_distribution_svg(values: np.ndarray, summary: FeatureDistributionSummary,
                             path, title: str | None = None) -> None:
    """Histogram of one feature's U samples with the nonzero-component KDE and
    the fitted Gaussian overlaid; any zero mass is reported as a separate
    point-mass weight in the corner."""
    values = np.asarray(values, dtype=np.float64)
    nonzero = values[values > 0]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if nonzero.size:
        ax.hist(nonzero, bins=min(40, max(10, nonzero.size // 25)), density=True,
                color="#bfd3e6", edgecolor="white", label="nonzero samples")
        grid = np.linspace(nonzero.min(), nonzero.max(), 400)
        if summary.kde is not None:
            ax.plot(grid, summary.kde(grid), color="#7b3294", lw=1.8, label="KDE")
        if summary.sd_all > 0:
            g = (np.exp(-0.5 * ((grid - summary.mean_all) / summary.sd_all) ** 2)
                 / (summary.sd_all * math.sqrt(2 * math.pi)))
            ax.plot(grid, g, color="#2c7bb6", lw=1.4, ls="--", label="fitted Gaussian")
    if summary.p_zero > 0:
        ax.annotate(f"zero mass: {100 * summary.p_zero:.2f}%",
                    xy=(0.02, 0.92), xycoords="axes fraction", fontsize=9)
    ax.set_xlabel("aggregated |SHAP|")
    ax.set_ylabel("density")
    ax.set_title(title or f"feature {summary.feature}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def comparison_bars_svg(table: ComparisonTable, metric: str, path,
                        title: str | None = None) -> None:
    """One grouped-bar chart per metric: bar height is the mean across the
    swept k values, error bars are +-SD across the same grid."""
    rows = [r for r in table.rows if r.metric == metric]
    if not rows:
        raise KeyError(f"metric {metric!r} not present in comparison table")
    methods = [r.method for r in rows]
    means = [r.mean for r in rows]
    sds = [r.sd for r in rows]
    colors = [_METHOD_COLORS.get(m, "#999999") for m in methods]
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    xs = np.arange(len(methods))
    ax.bar(xs, means, yerr=sds, capsize=4, color=colors)
    ax.set_xticks(xs)
    ax.set_xticklabels(methods, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel(f"{metric} (mean ± SD over k={list(table.k_values)})")
    ax.set_title(title or metric)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
