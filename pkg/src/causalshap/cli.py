"""Command-line front end: generate | discover | effects | attribute |
evaluate | report, driven by one JSON config with dotted --set overrides.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import copy
import csv as csvmod
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import svgplot
from .attribution import SamplerConfig
from .datatable import DataTable, load_csv, save_csv, train_test_split
from .evaluation import (
    global_importance,
    insertion_curve,
    mask_reference_values,
    reduced_feature_ground_truth,
    reduced_feature_set,
    summarize_insertion_runs,
)
from .external import ExternalModel
from .forest import train_random_forest
from .models import train_linear
from .pipeline import METHODS, Explainer
from .sem import BUILTIN_SPECS, builtin_table

DEFAULT_CONFIG = {
    "dataset": {},
    "split": {"test_fraction": 0.2, "seed": 0},
    "model": {"kind": "linear"},
    "discovery": {"alpha": 0.05, "max_cond_size": None},
    "attribution": {
        "method": "causal",
        "seed": 0,
        "mc_samples": 64,
        "mc_iterations": 512,
        "instances": None,
    },
    "evaluation": {
        "protocol": "rmse",
        "seeds": [0, 1, 2, 3, 4],
        "insertion_mask": "mean",
    },
    "output_dir": "out",
}


class ConfigError(ValueError):
    pass


def load_config(path: str, overrides: list[str]) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    _deep_update(cfg, user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    _validate_config(cfg)
    return cfg


def _deep_update(base: dict, extra: dict) -> None:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value


def _validate_config(cfg: dict) -> None:
    ds = cfg["dataset"]
    if "builtin" in ds:
        if ds["builtin"] not in BUILTIN_SPECS:
            raise ConfigError(
                f"unknown builtin dataset {ds['builtin']!r}; have {sorted(BUILTIN_SPECS)}"
            )
        ds.setdefault("n", 1000)
        ds.setdefault("seed", 0)
    elif "csv" in ds:
        if "target" not in ds:
            raise ConfigError("csv datasets require a 'target' column name")
        if not Path(ds["csv"]).exists():
            raise ConfigError(f"csv file not found: {ds['csv']}")
    else:
        raise ConfigError("dataset must specify 'builtin' or 'csv'")
    if cfg["attribution"].get("seed") is None:
        raise ConfigError("attribution.seed is mandatory")
    method = cfg["attribution"].get("method", "causal")
    if method not in METHODS:
        raise ConfigError(f"unknown attribution method {method!r}; expected one of {METHODS}")
    if cfg["model"].get("kind", "linear") not in ("linear", "random_forest", "external"):
        raise ConfigError(f"unknown model kind {cfg['model'].get('kind')!r}")


def _load_dataset(cfg: dict) -> DataTable:
    ds = cfg["dataset"]
    if "builtin" in ds:
        table, _spec = builtin_table(ds["builtin"], int(ds["n"]), int(ds["seed"]))
        return table
    return load_csv(ds["csv"], ds["target"])


def _train_model(cfg: dict, train: DataTable):
    model_cfg = cfg["model"]
    kind = model_cfg.get("kind", "linear")
    if kind == "linear":
        return train_linear(train, float(model_cfg.get("ridge_lambda", 0.0)))
    if kind == "random_forest":
        return train_random_forest(
            train,
            n_trees=int(model_cfg.get("n_trees", 100)),
            max_depth=int(model_cfg.get("max_depth", 8)),
            min_leaf=int(model_cfg.get("min_leaf", 5)),
            seed=int(model_cfg.get("seed", 0)),
        )
    return ExternalModel(model_cfg["command"], float(model_cfg.get("timeout", 30.0)))


def _sampler_config(cfg: dict) -> SamplerConfig:
    att = cfg["attribution"]
    return SamplerConfig(
        seed=int(att["seed"]),
        mc_samples=int(att.get("mc_samples", 64)),
        mc_iterations=int(att.get("mc_iterations", 512)),
    )


def _build_explainer(cfg: dict, train: DataTable) -> Explainer:
    model = _train_model(cfg, train)
    disc = cfg["discovery"]
    max_cond = disc.get("max_cond_size")
    return Explainer.build(
        train,
        model,
        _sampler_config(cfg),
        alpha=float(disc.get("alpha", 0.05)),
        max_cond_size=None if max_cond is None else int(max_cond),
    )


def write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -------------------------------------------------------


def cmd_generate(args) -> int:
    if args.n < 1:
        raise ConfigError(f"need n >= 1, got {args.n}")
    table, spec = builtin_table(args.spec, args.n, args.seed)
    save_csv(table, args.out)
    sidecar = {
        "spec": spec.to_json(),
        "true_edges": [[p, c, w] for p, c, w in spec.true_edges()],
        "binarized_target": args.spec == "classification",
    }
    write_json(str(args.out) + ".truth.json", sidecar)
    print(f"wrote {table.row_count}x{table.n_columns} rows to {args.out}")
    return 0


def cmd_discover(args) -> int:
    cfg = load_config(args.config, args.set or [])
    table = _load_dataset(cfg)
    split = train_test_split(table, float(cfg["split"]["test_fraction"]), int(cfg["split"]["seed"]))
    from .discovery import pc

    disc = cfg["discovery"]
    max_cond = disc.get("max_cond_size")
    cpdag = pc(
        split.train,
        alpha=float(disc.get("alpha", 0.05)),
        max_cond_size=None if max_cond is None else int(max_cond),
    )
    out = _outdir(cfg)
    write_json(out / "cpdag.json", cpdag.to_json())
    (out / "graph.dot").write_text(cpdag.to_dot(), encoding="utf-8")
    print(f"wrote {out / 'cpdag.json'} ({cpdag.n_edges()} edges)")
    return 0


def cmd_effects(args) -> int:
    cfg = load_config(args.config, args.set or [])
    table = _load_dataset(cfg)
    split = train_test_split(table, float(cfg["split"]["test_fraction"]), int(cfg["split"]["seed"]))
    from .discovery import pc
    from .effects import estimate_effects

    disc = cfg["discovery"]
    max_cond = disc.get("max_cond_size")
    cpdag = pc(
        split.train,
        alpha=float(disc.get("alpha", 0.05)),
        max_cond_size=None if max_cond is None else int(max_cond),
    )
    effects = estimate_effects(split.train, cpdag)
    out = _outdir(cfg)
    write_json(out / "effects.json", effects.to_json())
    print(f"wrote {out / 'effects.json'}")
    return 0


def cmd_attribute(args) -> int:
    cfg = load_config(args.config, args.set or [])
    method = cfg["attribution"].get("method", "causal")
    table = _load_dataset(cfg)
    split = train_test_split(table, float(cfg["split"]["test_fraction"]), int(cfg["split"]["seed"]))
    n_features = len(split.train.feature_names)
    if method == "exact" and n_features > 20:
        raise ConfigError(
            f"exact enumeration over 2^{n_features} coalitions is refused; "
            "use the causal, marginal or kernel method above 20 features"
        )
    explainer = _build_explainer(cfg, split.train)
    limit = cfg["attribution"].get("instances")
    test = split.test if limit is None else split.test.take_rows(np.arange(int(limit)))
    matrix, results = explainer.attribution_matrix(test, method, threads=args.threads)
    names = list(explainer.feature_names)
    preds = explainer.predictions(test)
    if results is not None:
        instances = [r.to_json() for r in results]
    else:
        instances = [
            {"instance_index": i, "phi": matrix[i].tolist(), "prediction": float(preds[i])}
            for i in range(matrix.shape[0])
        ]
    mean_abs = np.abs(matrix).mean(axis=0)
    mean_signed = matrix.mean(axis=0)
    doc = {
        "method": method,
        "feature_names": names,
        "gamma": {n: float(g) for n, g in zip(names, explainer.effects.gamma)},
        "baseline": explainer.baseline.expected_prediction,
        "aggregate": {
            "mean_abs": {n: float(v) for n, v in zip(names, mean_abs)},
            "mean_signed": {n: float(v) for n, v in zip(names, mean_signed)},
        },
        "instances": instances,
    }
    out = _outdir(cfg)
    write_json(out / "attributions.json", doc)
    svgplot.grouped_bar_chart(
        out / "bars.svg",
        names,
        {"mean |phi|": mean_abs.tolist(), "mean phi": mean_signed.tolist()},
        f"{method} attribution over {matrix.shape[0]} instances",
    )
    print(f"wrote {out / 'attributions.json'}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config, args.set or [])
    protocol = cfg["evaluation"].get("protocol", "rmse")
    if protocol == "rmse":
        return _evaluate_rmse(cfg, args.threads)
    if protocol == "insertion":
        return _evaluate_insertion(cfg, args.threads)
    raise ConfigError(f"unknown evaluation protocol {protocol!r}")


def _evaluate_rmse(cfg: dict, threads: int) -> int:
    table = _load_dataset(cfg)
    split = train_test_split(table, float(cfg["split"]["test_fraction"]), int(cfg["split"]["seed"]))
    explainer = _build_explainer(cfg, split.train)
    limit = cfg["attribution"].get("instances")
    test = split.test if limit is None else split.test.take_rows(np.arange(int(limit)))
    names = list(explainer.feature_names)
    extension = explainer.effects.extension
    reduced_idx = reduced_feature_set(extension, split.train.target_index)
    reduced_names = [extension.node_names[i] for i in reduced_idx]
    if not reduced_names:
        raise RuntimeError("discovered graph yields an empty reduced feature set")

    def model_family(train_table):
        return _train_model(cfg, train_table)

    methods = cfg["evaluation"].get("methods", ["causal", "marginal", "kernel"])
    per_method = {}
    bars = {}
    for method in methods:
        matrix, _results = explainer.attribution_matrix(test, method, threads=threads)
        report = reduced_feature_ground_truth(
            model_family, split.train, test, reduced_names, matrix, names
        )
        per_method[method] = report.to_json()
        bars[method] = report.method_values.tolist()
        ground_truth = report
    bars["ground truth"] = ground_truth.exact_values.tolist()
    out = _outdir(cfg)
    doc = {"protocol": "rmse", "reduced_features": reduced_names, "per_method": per_method}
    write_json(out / "report.json", doc)
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csvmod.writer(fh)
        writer.writerow(["method", "rmse", "rmse_mean_abs", "rmse_mean_signed"])
        for method in methods:
            writer.writerow(
                [
                    method,
                    per_method[method]["rmse"],
                    per_method[method]["rmse_mean_abs"],
                    per_method[method]["rmse_signed"],
                ]
            )
    svgplot.grouped_bar_chart(
        out / "bars.svg",
        reduced_names,
        bars,
        "median |attribution| on the reduced feature set",
    )
    print(f"wrote {out / 'report.json'}")
    for method in methods:
        print(f"  rmse[{method}] = {per_method[method]['rmse']:.4f}")
    return 0


def _evaluate_insertion(cfg: dict, threads: int) -> int:
    ds = cfg["dataset"]
    seeds = [int(s) for s in cfg["evaluation"].get("seeds", [0, 1, 2, 3, 4])]
    mask_kind = cfg["evaluation"].get("insertion_mask", "mean")
    rankings = ("causal", "marginal", "random")
    curves: dict[str, list] = {name: [] for name in rankings}
    per_seed_rows = []
    for seed in seeds:
        run_cfg = copy.deepcopy(cfg)
        if "builtin" in ds:
            run_cfg["dataset"]["seed"] = seed
        run_cfg["split"]["seed"] = seed
        run_cfg["model"]["seed"] = seed
        run_cfg["attribution"]["seed"] = seed
        table = _load_dataset(run_cfg)
        split = train_test_split(
            table, float(run_cfg["split"]["test_fraction"]), int(run_cfg["split"]["seed"])
        )
        explainer = _build_explainer(run_cfg, split.train)
        limit = run_cfg["attribution"].get("instances")
        test = split.test if limit is None else split.test.take_rows(np.arange(int(limit)))
        n_features = len(explainer.feature_names)
        mask_values = mask_reference_values(split.train, mask_kind, seed)
        causal_matrix, _ = explainer.attribution_matrix(test, "causal", threads=threads)
        marginal_matrix, _ = explainer.attribution_matrix(test, "marginal", threads=threads)
        orders = {
            "causal": global_importance(causal_matrix),
            "marginal": global_importance(marginal_matrix),
            "random": [int(i) for i in np.random.default_rng((seed, 999)).permutation(n_features)],
        }
        for name in rankings:
            curve = insertion_curve(explainer.model, test, orders[name], mask_values)
            curves[name].append(curve)
            for step in curve.per_step:
                per_seed_rows.append(
                    [seed, name, step["k"], step["auroc"], step["cross_entropy"], step["brier"]]
                )
    reports = {name: summarize_insertion_runs(curves[name]) for name in rankings}
    out = _outdir(cfg)
    doc = {
        "protocol": "insertion",
        "seeds": seeds,
        "per_ranking": {name: reports[name].to_json() for name in rankings},
    }
    write_json(out / "report.json", doc)
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csvmod.writer(fh)
        writer.writerow(["seed", "ranking", "step", "auroc", "cross_entropy", "brier"])
        writer.writerows(per_seed_rows)
    steps = list(range(1, len(curves["causal"][0].per_step) + 1))
    svgplot.line_chart(
        out / "curves.svg",
        steps,
        {
            name: [
                float(np.mean([c.per_step[k - 1]["auroc"] for c in curves[name]]))
                for k in steps
            ]
            for name in rankings
        },
        "insertion AUROC by step (mean over seeds)",
        x_label="features inserted",
    )
    print(f"wrote {out / 'report.json'}")
    for name in rankings:
        mean = reports[name].mean
        sd = reports[name].sd
        print(
            f"  {name}: auroc {mean['auroc']:.4f} +- {sd['auroc']:.4f}, "
            f"ce {mean['cross_entropy']:.4f}, brier {mean['brier']:.4f}"
        )
    return 0


def cmd_report(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "per_method" in doc:
        print(f"reduced features: {', '.join(doc['reduced_features'])}")
        print(f"{'method':<12} {'rmse':>10} {'rmse(signed)':>14}")
        for method, report in doc["per_method"].items():
            print(f"{method:<12} {report['rmse']:>10.4f} {report['rmse_signed']:>14.4f}")
    elif "per_ranking" in doc:
        print(f"{'ranking':<12} {'auroc':>16} {'cross entropy':>16} {'brier':>16}")
        for name, report in doc["per_ranking"].items():
            m, s = report["mean"], report["sd"]
            print(
                f"{name:<12} {m['auroc']:>9.4f} ± {s['auroc']:.4f}"
                f" {m['cross_entropy']:>9.4f} ± {s['cross_entropy']:.4f}"
                f" {m['brier']:>9.4f} ± {s['brier']:.4f}"
            )
    elif "aggregate" in doc:
        names = doc["feature_names"]
        print(f"method: {doc['method']}, baseline {doc['baseline']:.4f}")
        print(f"{'feature':<20} {'mean |phi|':>12} {'mean phi':>12} {'gamma':>8}")
        for name in names:
            gamma = doc.get("gamma", {}).get(name, float("nan"))
            print(
                f"{name:<20} {doc['aggregate']['mean_abs'][name]:>12.4f} "
                f"{doc['aggregate']['mean_signed'][name]:>12.4f} {gamma:>8.4f}"
            )
    else:
        raise ConfigError(f"{args.input} is not a recognised report artifact")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalshap",
        description="causality-aware Shapley attribution toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a builtin synthetic dataset to CSV")
    p.add_argument("--spec", required=True, choices=sorted(BUILTIN_SPECS))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    for name, func, help_text in (
        ("discover", cmd_discover, "run graph discovery, write cpdag.json + graph.dot"),
        ("effects", cmd_effects, "estimate causal effects, write effects.json"),
        ("attribute", cmd_attribute, "full pipeline, write attributions.json + bars.svg"),
        ("evaluate", cmd_evaluate, "run the evaluation protocol, write report.json/csv"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--set", action="append", metavar="KEY=VALUE")
        p.add_argument(
            "--threads",
            type=int,
            default=int(os.environ.get("CAUSALSHAP_THREADS", "1")),
        )
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="pretty-print a JSON artifact (4 decimals)")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single reporting point
        print(f"error [{type(exc).__module__}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
