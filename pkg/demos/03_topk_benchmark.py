"""Feature-selection benchmark: do RoSHAP-selected features predict as well
as everything else's selections?

For each importance method the top-k features refit the same fixed-parameter
model on the same train/test split, and metrics are averaged over a k sweep.

Run from the repository root:  python3 demos/03_topk_benchmark.py
"""

import os

from roshap import (EvalConfig, GbdtParams, SimulationConfig, evaluate_topk,
                    gain_importance_vector, information_gain, rank_features,
                    run_bootstrap_attribution, simulate_zig, single_run_shap,
                    summarize_runs, sweep)
from roshap.evalharness import write_comparison_csv
from roshap.plots import comparison_bars_svg

ds = simulate_zig(SimulationConfig(n=400, d=50, s=5), seed=202)
params = GbdtParams(num_rounds=40, max_depth=4)
cfg = EvalConfig(k_values=(1, 2, 3, 5, 8, 12), params=params, master_seed=9)

runs = run_bootstrap_attribution(ds, params, B=60, master_seed=9, workers=2)
rankings = {
    "roshap": rank_features(summarize_runs(runs), ds.feature_names),
    "single_shap": single_run_shap(ds, params, seed=9),
    "gain": gain_importance_vector(ds, params, seed=9),
    "info_gain": information_gain(ds),
}

table = sweep(ds, rankings, cfg, workers=2)
print(f"{'method':<12} {'metric':<18} {'mean':>7} {'sd':>7}")
for row in table.rows:
    print(f"{row.method:<12} {row.metric:<18} {row.mean:>7.3f} {row.sd:>7.3f}")

# parity check against the full-feature model
full = evaluate_topk(ds, rankings["roshap"], ds.n_features, cfg)
top5 = evaluate_topk(ds, rankings["roshap"], 5, cfg)
print(f"\naccuracy, all {ds.n_features} features: {full.accuracy:.3f}")
print(f"accuracy, top-5 RoSHAP features:  {top5.accuracy:.3f}")

os.makedirs("demo_output", exist_ok=True)
write_comparison_csv(table, "demo_output/comparison.csv")
for metric in ("accuracy", "auc_roc"):
    comparison_bars_svg(table, metric, f"demo_output/comparison_{metric}.svg")
print("wrote demo_output/comparison.csv and two SVG charts")
