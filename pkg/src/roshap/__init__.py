"""Bootstrap distribution estimation for tree-ensemble SHAP attributions,
zero-inflated feature summaries, the RoSHAP robust ranking score, and a
top-k refit benchmark harness."""

__version__ = "0.1.0"

from .attribution import (AttributionRun, FeatureDistributionSummary,
                          GaussianKde, LyapunovDiagnostic, RankingTable,
                          ZeroInflatedMoments, kde_density,
                          lyapunov_diagnostic, rank_features, roshap_score,
                          run_bootstrap_attribution, summarize_feature,
                          summarize_runs, u_matrix, zero_inflated_moments)
from .baselines import (ImportanceVector, gain_importance_vector,
                        information_gain, single_run_shap)
from .dataset import (BootstrapSplit, Dataset, SimulationConfig,
                      bootstrap_resample, derive_run_seed, load_csv,
                      simulate_zig, train_test_split, write_csv)
from .errors import ConfigError, DataError, NumericError, RoshapError
from .evalharness import (ComparisonTable, EvalConfig, MetricReport,
                          classification_metrics, evaluate_topk,
                          regression_metrics, sweep)
from .trees import (GbdtParams, Tree, TreeEnsemble, dump_model, fit_gbdt,
                    gain_importance, load_model, predict_margin,
                    predict_proba)
from .treeshap import (Attribution, brute_force_shapley, expected_value,
                       shap_matrix, tree_shap)

__all__ = [
    "Attribution", "AttributionRun", "BootstrapSplit", "ComparisonTable",
    "ConfigError", "DataError", "Dataset", "EvalConfig",
    "FeatureDistributionSummary", "GaussianKde", "GbdtParams",
    "ImportanceVector", "LyapunovDiagnostic", "MetricReport", "NumericError",
    "RankingTable", "RoshapError", "SimulationConfig", "Tree", "TreeEnsemble",
    "ZeroInflatedMoments", "bootstrap_resample", "brute_force_shapley",
    "classification_metrics", "derive_run_seed", "dump_model",
    "evaluate_topk", "expected_value", "fit_gbdt", "gain_importance",
    "gain_importance_vector", "information_gain", "kde_density", "load_csv",
    "load_model", "lyapunov_diagnostic", "predict_margin", "predict_proba",
    "rank_features", "regression_metrics", "roshap_score",
    "run_bootstrap_attribution", "shap_matrix", "simulate_zig",
    "single_run_shap", "summarize_feature", "summarize_runs", "sweep",
    "train_test_split", "tree_shap", "u_matrix", "write_csv",
    "zero_inflated_moments",
]
