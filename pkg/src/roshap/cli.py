"""Command-line entry point wiring the modules into reproducible experiments.

Subcommands: simulate, attribute, rank, diagnose, select-eval. Every
randomized command requires an explicit --seed; parameters come from flags
or a TOML file, flags winning on conflict. Each command writes a JSON run
manifest (config echo, timings, output hashes) next to its outputs.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric/degeneracy.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import __version__, attribution, baselines, evalharness, plots
from .dataset import (CLASSIFICATION, Dataset, SimulationConfig, load_csv,
                      simulate_zig, write_csv)
from .errors import ConfigError, DataError, NumericError
from .trees import GbdtParams

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Run record written atomically alongside every output set; re-running
    the echoed command with the echoed config reproduces the outputs
    bit-exactly (timings aside)."""

    def __init__(self, command: str, config: dict):
        self.doc = {"command": command, "config": config,
                    "artifact_version": __version__, "timings_s": {},
                    "outputs": []}
        self._t0 = time.perf_counter()
        self._phase = None

    def phase(self, name: str):
        self._flush()
        self._phase = name
        self._t0 = time.perf_counter()

    def _flush(self):
        if self._phase is not None:
            self.doc["timings_s"][self._phase] = round(
                time.perf_counter() - self._t0, 6)

    def add_output(self, path: str):
        self.doc["outputs"].append({"path": os.path.basename(path),
                                    "sha256": _sha256(path)})

    def write(self, path: str):
        self._flush()
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)


def _load_toml(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _merge_config(cls, file_path: str | None, flag_values: dict):
    """Dataclass defaults <- TOML file <- explicit flags (flags win)."""
    values = {}
    if file_path:
        doc = _load_toml(file_path)
        fields = {f.name for f in dataclasses.fields(cls)}
        for k, v in doc.items():
            if k not in fields:
                raise ConfigError(f"{file_path}: unknown key {k!r} for {cls.__name__}")
            values[k] = v
    for k, v in flag_values.items():
        if v is not None:
            values[k] = v
    return cls(**values)


def _parse_recode(pairs) -> dict[float, float] | None:
    if not pairs:
        return None
    out = {}
    for pair in pairs:
        try:
            old, new = pair.split("=", 1)
            out[float(old)] = float(new)
        except ValueError:
            raise ConfigError(f"--recode expects OLD=NEW numbers, got {pair!r}") from None
    return out


def _parse_int_list(text: str) -> list[int]:
    """Comma list with ranges: "1,2,5-8" -> [1, 2, 5, 6, 7, 8]."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ConfigError(f"empty integer list {text!r}")
    return out


def _load_dataset(args) -> Dataset:
    return load_csv(args.data, args.target, args.task,
                    recode=_parse_recode(getattr(args, "recode", None)))


def _gbdt_params(args) -> GbdtParams:
    flags = {k: getattr(args, k, None)
             for k in ("num_rounds", "max_depth", "learning_rate", "lambda_l2",
                       "min_child_weight", "min_gain")}
    return _merge_config(GbdtParams, getattr(args, "params_file", None), flags)


def _add_trainer_flags(sub):
    sub.add_argument("--params-file", help="TOML file with trainer parameters")
    sub.add_argument("--num-rounds", dest="num_rounds", type=int)
    sub.add_argument("--max-depth", dest="max_depth", type=int)
    sub.add_argument("--learning-rate", dest="learning_rate", type=float)
    sub.add_argument("--lambda-l2", dest="lambda_l2", type=float)
    sub.add_argument("--min-child-weight", dest="min_child_weight", type=float)
    sub.add_argument("--min-gain", dest="min_gain", type=float)


def _add_data_flags(sub, with_params: bool = True):
    sub.add_argument("--data", required=True, help="input CSV (header row required)")
    sub.add_argument("--target", required=True, help="target column name")
    sub.add_argument("--task", required=True, choices=[CLASSIFICATION, "regression"])
    sub.add_argument("--recode", action="append", metavar="OLD=NEW",
                     help="recode exact feature values at ingestion (repeatable)")
    if with_params:
        _add_trainer_flags(sub)


def cmd_simulate(args) -> int:
    flags = {k: getattr(args, k) for k in
             ("n", "d", "s", "sigma_signal", "pi_signal", "sigma_noise",
              "pi_noise", "mu_max", "mu_min")}
    cfg = _merge_config(SimulationConfig, args.config, flags)
    manifest = Manifest("simulate", {"seed": args.seed,
                                     **dataclasses.asdict(cfg)})
    manifest.phase("generate")
    ds = simulate_zig(cfg, args.seed)
    manifest.phase("write")
    write_csv(ds, args.out)
    manifest.add_output(args.out)
    manifest.write(args.out + ".manifest.json")
    print(f"wrote {ds.n_rows}x{ds.n_features + 1} CSV to {args.out}")
    return 0


def cmd_attribute(args) -> int:
    params = _gbdt_params(args)
    keep = None
    if args.keep_samples:
        keep = "all" if args.keep_samples == "all" \
            else _parse_int_list(args.keep_samples)
    os.makedirs(args.out_dir, exist_ok=True)
    manifest = Manifest("attribute", {
        "data": args.data, "target": args.target, "task": args.task,
        "runs": args.runs, "master_seed": args.seed, "workers": args.workers,
        "keep_samples": args.keep_samples,
        "stratified_bootstrap": args.stratified_bootstrap,
        "zero_snap": attribution.ZERO_SNAP,
        "attribution_scale": "margin (log-odds for classification)",
        "u_rescaling": "n/oob_size",
        "params": dataclasses.asdict(params)})
    manifest.phase("load")
    ds = _load_dataset(args)
    manifest.phase("bootstrap")
    runs = attribution.run_bootstrap_attribution(
        ds, params, args.runs, args.seed, workers=args.workers,
        keep_samples=keep, stratified_bootstrap=args.stratified_bootstrap,
        attribution_dump_dir=args.out_dir if args.dump_attributions else None)
    manifest.phase("write")
    u_path = os.path.join(args.out_dir, "u_samples.csv")
    attribution.write_u_dump(runs, ds.feature_names, u_path)
    manifest.add_output(u_path)
    if keep is not None:
        kept = range(ds.n_features) if keep == "all" else keep
        for j in kept:
            p = os.path.join(args.out_dir, f"per_sample_{ds.feature_names[j]}.csv")
            attribution.write_per_sample_dump(runs, j, ds.feature_names[j], p)
            manifest.add_output(p)
    if args.dump_attributions:
        for b in range(1, args.runs + 1):
            manifest.add_output(os.path.join(args.out_dir, f"attributions_run{b}.csv"))
    manifest.doc["n_rows"] = ds.n_rows
    manifest.write(os.path.join(args.out_dir, "manifest.json"))
    print(f"wrote {args.runs}x{ds.n_features} U matrix to {u_path}")
    return 0


def cmd_rank(args) -> int:
    manifest = Manifest("rank", {"udump": args.udump, "data": args.data,
                                 "method": args.method, "seed": args.seed,
                                 "num_bins": args.num_bins,
                                 "test_fraction": args.test_fraction})
    manifest.phase("rank")
    names = None
    if args.method == "roshap":
        if not args.udump:
            raise ConfigError("--method roshap requires --udump from `attribute`")
        U, names, _ = attribution.read_u_dump(args.udump)
        summaries = [attribution.summarize_feature(U[:, j], feature=j)
                     for j in range(U.shape[1])]
        table = attribution.rank_features(summaries, feature_names=names)
        values = U
    else:
        if not (args.data and args.target and args.task):
            raise ConfigError(
                f"--method {args.method} requires --data, --target, and --task")
        ds = _load_dataset(args)
        names = ds.feature_names
        params = _gbdt_params(args)
        if args.method == "info_gain":
            iv = baselines.information_gain(ds, num_bins=args.num_bins)
        elif args.method == "gain":
            iv = baselines.gain_importance_vector(ds, params, args.seed or 0)
        else:
            if args.seed is None:
                raise ConfigError("--method single_shap requires --seed")
            iv = baselines.single_run_shap(ds, params, args.seed,
                                           test_fraction=args.test_fraction)
        table = iv.ranking(feature_names=names)
        values = None
    manifest.phase("write")
    attribution.write_ranking_csv(table, args.out)
    manifest.add_output(args.out)
    if args.plot_features and values is not None:
        os.makedirs(args.plot_dir, exist_ok=True)
        for j in _parse_int_list(args.plot_features):
            s = attribution.summarize_feature(values[:, j], feature=j)
            p = os.path.join(args.plot_dir, f"distribution_{names[j]}.svg")
            plots.feature_distribution_svg(values[:, j], s, p, title=names[j])
            manifest.add_output(p)
    manifest.write(args.out + ".manifest.json")
    print(f"wrote ranking ({args.method}) to {args.out}")
    return 0


def cmd_diagnose(args) -> int:
    manifest = Manifest("diagnose", {"run_dir": args.run_dir,
                                     "feature": args.feature,
                                     "dominance_threshold": args.dominance_threshold})
    manifest.phase("load")
    u_path = os.path.join(args.run_dir, "u_samples.csv")
    if not os.path.exists(u_path):
        raise DataError(f"no u_samples.csv under {args.run_dir}")
    U, names, _ = attribution.read_u_dump(u_path)
    j = args.feature
    if not 0 <= j < len(names):
        raise ConfigError(f"--feature {j} outside [0, {len(names)})")
    manifest.phase("diagnose")
    summary = attribution.summarize_feature(U[:, j], feature=j)
    report = {
        "feature": j, "name": names[j], "runs": int(U.shape[0]),
        "p_zero": summary.p_zero, "median_nonzero": summary.median_nonzero,
        "sd_all": summary.sd_all, "mean_all": summary.mean_all,
        "skewness": summary.skewness, "excess_kurtosis": summary.excess_kurtosis,
        "normality_stat": summary.normality_stat,
    }
    sample_path = os.path.join(args.run_dir, f"per_sample_{names[j]}.csv")
    if os.path.exists(sample_path):
        n_rows = _manifest_row_count(args.run_dir)
        per_obs = attribution.read_per_sample_dump(sample_path, n_rows)
        try:
            diag = attribution.lyapunov_diagnostic(
                per_obs, dominance_threshold=args.dominance_threshold)
        except NumericError as e:
            diag = None
            report["lyapunov_ratio"] = None
            report["max_var_share"] = None
            report["note"] = f"per-sample diagnostics unavailable: {e}"
        if diag is not None:
            report["lyapunov_ratio"] = diag.ratio
            report["max_var_share"] = diag.max_var_share
            report["gaussian_recommended"] = diag.gaussian_recommended
            if not diag.gaussian_recommended:
                report["note"] = ("Gaussian summary not recommended: a single "
                                  "observation dominates the variance; use the KDE.")
    else:
        report["lyapunov_ratio"] = None
        report["max_var_share"] = None
        report["note"] = (f"per-sample diagnostics unavailable: {sample_path} "
                          "missing (re-run `attribute` with --keep-samples)")
    manifest.phase("write")
    out = os.path.join(args.run_dir, f"diagnostics_{names[j]}.json")
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    manifest.add_output(out)
    svg = os.path.join(args.run_dir, f"diagnostics_{names[j]}.svg")
    plots.feature_distribution_svg(U[:, j], summary, svg, title=names[j])
    manifest.add_output(svg)
    manifest.write(os.path.join(args.run_dir, f"diagnostics_{names[j]}.manifest.json"))
    for k, v in report.items():
        print(f"{k}: {v}")
    return 0


def _manifest_row_count(run_dir: str) -> int:
    path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(path):
        raise DataError(f"missing manifest.json under {run_dir} "
                        "(needed for the dataset row count)")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return int(doc["n_rows"])
    except KeyError:
        raise DataError(f"{path} lacks n_rows; was it written by `attribute`?") from None


def cmd_select_eval(args) -> int:
    params = _gbdt_params(args)
    methods = tuple(args.methods.split(","))
    k_values = tuple(_parse_int_list(args.k_list))
    os.makedirs(args.out_dir, exist_ok=True)
    manifest = Manifest("select-eval", {
        "data": args.data, "target": args.target, "task": args.task,
        "k_values": list(k_values), "methods": list(methods),
        "master_seed": args.seed, "runs": args.runs,
        "test_fraction": args.test_fraction, "workers": args.workers,
        "num_bins": args.num_bins, "params": dataclasses.asdict(params)})
    manifest.phase("load")
    ds = _load_dataset(args)
    cfg = evalharness.EvalConfig(k_values=k_values, methods=methods,
                                 test_fraction=args.test_fraction,
                                 params=params, master_seed=args.seed)
    manifest.phase("rankings")
    rankings = {}
    for m in methods:
        if m == "roshap":
            runs = attribution.run_bootstrap_attribution(
                ds, params, args.runs, args.seed, workers=args.workers)
            summaries = attribution.summarize_runs(runs)
            rankings[m] = attribution.rank_features(summaries, ds.feature_names)
        elif m == "single_shap":
            rankings[m] = baselines.single_run_shap(
                ds, params, args.seed, test_fraction=args.test_fraction)
        elif m == "gain":
            rankings[m] = baselines.gain_importance_vector(ds, params, args.seed)
        elif m == "info_gain":
            rankings[m] = baselines.information_gain(ds, num_bins=args.num_bins)
        else:
            raise ConfigError(f"unknown method {m!r}")
    manifest.phase("sweep")
    table = evalharness.sweep(ds, rankings, cfg, workers=args.workers)
    manifest.phase("write")
    csv_path = os.path.join(args.out_dir, "comparison.csv")
    evalharness.write_comparison_csv(table, csv_path)
    manifest.add_output(csv_path)
    metrics = evalharness.CLASSIFICATION_METRICS if ds.task == CLASSIFICATION \
        else evalharness.REGRESSION_METRICS
    for metric in metrics:
        if any(r.metric == metric for r in table.rows):
            p = os.path.join(args.out_dir, f"comparison_{metric}.svg")
            plots.comparison_bars_svg(table, metric, p)
            manifest.add_output(p)
    manifest.write(os.path.join(args.out_dir, "manifest.json"))
    print(f"wrote comparison table to {csv_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roshap",
        description="Bootstrap SHAP distribution estimation and robust feature ranking")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate the zero-inflated Gaussian design")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="TOML file with generator parameters")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--sigma-signal", dest="sigma_signal", type=float)
    p.add_argument("--pi-signal", dest="pi_signal", type=float)
    p.add_argument("--sigma-noise", dest="sigma_noise", type=float)
    p.add_argument("--pi-noise", dest="pi_noise", type=float)
    p.add_argument("--mu-max", dest="mu_max", type=float)
    p.add_argument("--mu-min", dest="mu_min", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attribute", help="bootstrap refit + OOB SHAP aggregation")
    _add_data_flags(p)
    p.add_argument("--runs", type=int, required=True, metavar="B")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--keep-samples", dest="keep_samples",
                   help="'all' or feature indices like '0,1,5-8' to retain "
                        "per-row |SHAP| for diagnostics")
    p.add_argument("--stratified-bootstrap", action="store_true",
                   dest="stratified_bootstrap")
    p.add_argument("--dump-attributions", action="store_true",
                   dest="dump_attributions",
                   help="also write each run's raw OOB attribution CSV (large)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("rank", help="rank features from a U dump or a baseline")
    p.add_argument("--udump", help="u_samples.csv from `attribute`")
    p.add_argument("--method", default="roshap", choices=list(baselines.METHODS))
    p.add_argument("--out", required=True)
    p.add_argument("--data")
    p.add_argument("--target")
    p.add_argument("--task", choices=[CLASSIFICATION, "regression"])
    p.add_argument("--recode", action="append", metavar="OLD=NEW")
    _add_trainer_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--num-bins", dest="num_bins", type=int, default=10)
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=0.3)
    p.add_argument("--plot-features", dest="plot_features",
                   help="feature indices to render distribution SVGs for")
    p.add_argument("--plot-dir", dest="plot_dir", default=".")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("diagnose",
                       help="normality and Lyapunov diagnostics for one feature")
    p.add_argument("--run-dir", dest="run_dir", required=True,
                   help="output directory of `attribute`")
    p.add_argument("--feature", type=int, required=True)
    p.add_argument("--dominance-threshold", dest="dominance_threshold",
                   type=float, default=0.5)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("select-eval", help="top-k refit benchmark across methods")
    _add_data_flags(p)
    p.add_argument("--k-list", dest="k_list", required=True,
                   help="feature-set sizes, e.g. '1-15' or '5,10,20'")
    p.add_argument("--methods", default="roshap,single_shap,gain,info_gain")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--runs", type=int, default=100, metavar="B",
                   help="bootstrap runs behind the roshap ranking")
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=0.3)
    p.add_argument("--num-bins", dest="num_bins", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_select_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
