"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Heavy artifacts (attribution matrices, insertion runs) are computed once in
module fixtures and shared across criteria.  Every tolerance is pinned here.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from causalshap.attribution import (
    SamplerConfig,
    causal_shap,
    exact_shapley,
    sample_out_of_coalition,
    shapley_kernel_weight,
)
from causalshap.cli import main as cli_main
from causalshap.datatable import train_test_split
from causalshap.discovery import dag_to_cpdag, pc, pc_skeleton
from causalshap.effects import estimate_effects
from causalshap.evaluation import (
    global_importance,
    insertion_curve,
    mask_reference_values,
    reduced_feature_ground_truth,
    reduced_feature_set,
)
from causalshap.forest import train_random_forest
from causalshap.graphs import DsepOracle
from causalshap.models import predict_batch, train_linear
from causalshap.pipeline import Explainer
from causalshap.sem import (
    cardio_spec,
    classification_spec,
    lung_cancer_spec,
    sample_classification,
    sample_sem,
)
from graphgen import enumerate_dags, random_dag


def report(criterion: int, passed: bool, detail: str) -> None:
    flag = "PASS" if passed else "FAIL"
    print(f"[acceptance] criterion {criterion:2d}: {flag} - {detail}")
    assert passed, f"criterion {criterion}: {detail}"


# -- shared pipelines ----------------------------------------------------


@pytest.fixture(scope="module")
def lung_run():
    start = time.monotonic()
    table = sample_sem(lung_cancer_spec(0), 1000)
    split = train_test_split(table, 0.2, 0)
    model = train_linear(split.train, ridge_lambda=100.0)
    explainer = Explainer.build(split.train, model, SamplerConfig(seed=0, mc_samples=256))
    t0 = time.monotonic()
    causal_matrix, results = explainer.attribution_matrix(split.test, "causal")
    causal_seconds = time.monotonic() - t0
    marginal_matrix, _ = explainer.attribution_matrix(split.test, "marginal")
    kernel_matrix, _ = explainer.attribution_matrix(split.test, "kernel")
    return {
        "split": split,
        "explainer": explainer,
        "causal": causal_matrix,
        "results": results,
        "marginal": marginal_matrix,
        "kernel": kernel_matrix,
        "causal_seconds": causal_seconds,
        "total_seconds": time.monotonic() - start,
    }


@pytest.fixture(scope="module")
def cardio_run():
    start = time.monotonic()
    table = sample_sem(cardio_spec(0), 1000)
    split = train_test_split(table, 0.2, 0)
    model = train_linear(split.train)
    explainer = Explainer.build(split.train, model, SamplerConfig(seed=0, mc_samples=256))
    t0 = time.monotonic()
    causal_matrix, results = explainer.attribution_matrix(split.test, "causal")
    causal_seconds = time.monotonic() - t0
    marginal_matrix, _ = explainer.attribution_matrix(split.test, "marginal")
    kernel_matrix, _ = explainer.attribution_matrix(split.test, "kernel")
    return {
        "split": split,
        "explainer": explainer,
        "causal": causal_matrix,
        "results": results,
        "marginal": marginal_matrix,
        "kernel": kernel_matrix,
        "causal_seconds": causal_seconds,
        "total_seconds": time.monotonic() - start,
    }


@pytest.fixture(scope="module")
def insertion_runs():
    """5-seed classification benchmark: rankings and insertion curves."""
    runs = []
    for seed in range(5):
        table = sample_classification(classification_spec(seed), 1000)
        split = train_test_split(table, 0.2, seed)
        model = train_random_forest(split.train, seed=seed)
        explainer = Explainer.build(
            split.train, model, SamplerConfig(seed=seed, mc_samples=64), alpha=0.01
        )
        causal_matrix, _ = explainer.attribution_matrix(split.test, "causal")
        marginal_matrix, _ = explainer.attribution_matrix(split.test, "marginal")
        mask = mask_reference_values(split.train, "mean")
        n_features = len(explainer.feature_names)
        orders = {
            "causal": global_importance(causal_matrix),
            "marginal": global_importance(marginal_matrix),
            "random": [int(i) for i in np.random.default_rng((seed, 999)).permutation(n_features)],
        }
        curves = {
            name: insertion_curve(model, split.test, order, mask)
            for name, order in orders.items()
        }
        runs.append(
            {
                "seed": seed,
                "split": split,
                "model": model,
                "explainer": explainer,
                "mask": mask,
                "curves": curves,
            }
        )
    return runs


# -- criteria ------------------------------------------------------------


def test_criterion_1_local_accuracy(lung_run, cardio_run):
    worst = 0.0
    checked = 0
    for run in (lung_run, cardio_run):
        for res in run["results"]:
            if "degenerate_normalization" in res.flags:
                continue
            gap = res.prediction - res.baseline
            err = abs(res.phi_normalized.sum() - gap) / max(1.0, abs(gap))
            worst = max(worst, err)
            checked += 1
    runtime = lung_run["causal_seconds"] + cardio_run["causal_seconds"]
    report(
        1,
        worst <= 1e-9 and checked >= 380 and runtime < 120,
        f"sum(phi_n) = f(x) - E[f(X)] on {checked} instances, worst rel err "
        f"{worst:.2e} (<= 1e-9), attribution runtime {runtime:.0f}s (< 120s)",
    )


def test_criterion_2_missingness(lung_run, cardio_run):
    lung_names = list(lung_run["explainer"].feature_names)
    coffee = lung_names.index("drink_coffee")
    lung_zero = all(
        res.phi_causal[coffee] == 0.0 and res.phi_normalized[coffee] == 0.0
        for res in lung_run["results"]
    )
    cardio_names = list(cardio_run["explainer"].feature_names)
    zero_features = [cardio_names.index("mental_health"), cardio_names.index("family_history")]
    cardio_zero = all(
        res.phi_causal[i] == 0.0 and res.phi_normalized[i] == 0.0
        for res in cardio_run["results"]
        for i in zero_features
    )
    report(
        2,
        lung_zero and cardio_zero,
        "drink_coffee, mental_health and family_history receive exactly 0 "
        f"on all {len(lung_run['results'])} + {len(cardio_run['results'])} instances",
    )


class _Bump:
    prediction_mode = "regression"

    def __init__(self, base, feature, threshold, delta):
        self.base, self.feature, self.threshold, self.delta = base, feature, threshold, delta
        self.n_features = base.n_features

    def predict(self, rows):
        return self.base.predict(rows) + self.delta * (rows[:, self.feature] > self.threshold)


def test_criterion_3_consistency(lung_run):
    explainer = lung_run["explainer"]
    X = lung_run["split"].test.feature_matrix()
    medians = np.median(lung_run["split"].train.feature_matrix(), axis=0)
    held = 0
    trials = 0
    rng = np.random.default_rng(2024)
    while trials < 100:
        feature = int(rng.integers(0, 2))  # smoking or stress (gamma > 0)
        row = int(rng.integers(0, X.shape[0]))
        if X[row, feature] <= medians[feature]:
            continue
        config = SamplerConfig(seed=int(rng.integers(0, 2**31)), mc_samples=16)
        base = causal_shap(
            explainer.model, X[row], explainer.effects.gamma, explainer.cache,
            config, explainer.baseline, instance_index=row,
        )
        bumped = causal_shap(
            _Bump(explainer.model, feature, medians[feature], 1.0), X[row],
            explainer.effects.gamma, explainer.cache, config, explainer.baseline,
            instance_index=row,
        )
        trials += 1
        if bumped.phi_causal[feature] >= base.phi_causal[feature]:
            held += 1
    report(3, held == 100, f"monotone bump raised phi_c in {held}/100 frozen-stream trials")


def _ordering(run, reduced_expected):
    split = run["split"]
    explainer = run["explainer"]
    extension = explainer.effects.extension
    reduced_idx = reduced_feature_set(extension, split.train.target_index)
    reduced = [extension.node_names[i] for i in reduced_idx]
    assert reduced == reduced_expected, f"discovered reduced set {reduced}"
    names = list(explainer.feature_names)

    def family(table):
        return train_linear(table, ridge_lambda=run["ridge"])

    reports = {}
    for method in ("causal", "marginal", "kernel"):
        reports[method] = reduced_feature_ground_truth(
            family, split.train, split.test, reduced, run[method], names
        )
    return reports


def test_criterion_4_table2_lung(lung_run):
    lung_run["ridge"] = 100.0
    start = time.monotonic()
    reports = _ordering(lung_run, ["smoking", "stress"])
    rc = reports["causal"].rmse
    rm = reports["marginal"].rmse
    rk = reports["kernel"].rmse
    runtime = lung_run["total_seconds"] + (time.monotonic() - start)
    report(
        4,
        rc < rm and rc < rk and rc < 0.5 and runtime < 300,
        f"lung RMSE causal {rc:.4f} < marginal {rm:.4f} and < kernel {rk:.4f}, "
        f"causal < 0.5, runtime {runtime:.0f}s (< 300s)",
    )


def test_criterion_5_table2_cardio(cardio_run):
    cardio_run["ridge"] = 0.0
    reports = _ordering(cardio_run, ["diet_score", "sleep_duration"])
    rc = reports["causal"].rmse
    rm = reports["marginal"].rmse
    rk = reports["kernel"].rmse
    report(
        5,
        rc < rm and rc < rk,
        f"cardio RMSE causal {rc:.4f} < marginal {rm:.4f} and < kernel {rk:.4f} "
        "on {diet_score, sleep_duration}",
    )


TRUE_LUNG_SKELETON = {
    frozenset(("smoking", "drink_coffee")),
    frozenset(("stress", "drink_coffee")),
    frozenset(("smoking", "lung_cancer_risk")),
    frozenset(("stress", "lung_cancer_risk")),
}


def test_criterion_6_pc_recovery():
    exact = 0
    for seed in range(5):
        table = sample_sem(lung_cancer_spec(seed), 1000)
        skeleton, _ = pc_skeleton(table, alpha=0.05)
        names = skeleton.node_names
        pairs = {frozenset((names[i], names[j])) for i, j, _ in skeleton.edges()}
        exact += pairs == TRUE_LUNG_SKELETON
    mismatches = 0
    graphs = 0
    for n in (2, 3, 4, 5):
        for dag in enumerate_dags(n):
            oracle = DsepOracle(dag)
            got = pc(None, ci_test=oracle.ci_test, node_names=dag.node_names,
                     max_cond_size=max(n - 2, 0))
            graphs += 1
            if not np.array_equal(got.adj, dag_to_cpdag(dag).adj):
                mismatches += 1
    rng = np.random.default_rng(6)
    if os.environ.get("CAUSALSHAP_EXHAUSTIVE_6"):
        six = enumerate_dags(6)
    else:
        six = [random_dag(6, rng) for _ in range(2000)]
    for dag in six:
        oracle = DsepOracle(dag)
        got = pc(None, ci_test=oracle.ci_test, node_names=dag.node_names, max_cond_size=4)
        graphs += 1
        if not np.array_equal(got.adj, dag_to_cpdag(dag).adj):
            mismatches += 1
    report(
        6,
        exact >= 4 and mismatches == 0,
        f"lung skeleton exact in {exact}/5 seeds (>= 4); oracle PC exact on "
        f"{graphs} DAGs (all <= 5 nodes exhaustively, 6-node "
        f"{'exhaustive' if os.environ.get('CAUSALSHAP_EXHAUSTIVE_6') else 'sample'}), "
        f"{mismatches} mismatches",
    )


def test_criterion_7_ida_fidelity():
    table = sample_sem(cardio_spec(0), 5000)
    effects = estimate_effects(table, pc(table, alpha=0.05))
    names = table.column_names
    w_diet = effects.total_effects[names.index("diet_score")]
    w_sleep = effects.total_effects[names.index("sleep_duration")]
    report(
        7,
        abs(w_diet - 0.6) <= 0.1 and abs(w_sleep - 0.75) <= 0.1,
        f"W_diet = {w_diet:.3f} (0.6 +- 0.1), W_sleep = {w_sleep:.3f} (0.75 +- 0.1) at n=5000",
    )


def test_criterion_8_oracle_equivalence():
    worst_ratio = 0.0
    for seed in range(5):
        table = sample_sem(lung_cancer_spec(seed), 1000)
        split = train_test_split(table, 0.2, seed)
        model = train_linear(split.train)
        config = SamplerConfig(seed=seed, mc_samples=10000)
        explainer = Explainer.build(split.train, model, config)
        cache, gamma = explainer.cache, explainer.effects.gamma
        x = split.test.feature_matrix()[0]

        def exact_value(members):
            m = x.astype(float).copy()
            pinned = set(members)
            for f in cache.topo:
                if f in pinned:
                    continue
                if f in cache.marginals:
                    m[f] = cache.marginals[f].mean()
                else:
                    reg = cache.regressions[f]
                    m[f] = reg.coef @ m[list(reg.parents)] + reg.intercept
            return float(model.weights @ m + model.intercept)

        exact = exact_shapley(exact_value, 3, gamma=gamma)
        res = explainer.explain_causal(x, instance_index=0)
        # per-subset sampling sd from an independent stream
        sigma = np.zeros(8)
        for mask in range(8):
            members = tuple(i for i in range(3) if mask >> i & 1)
            if len(members) == 3:
                continue
            rows = sample_out_of_coalition(
                x, members, cache, np.random.default_rng((seed, 777, mask)), size=4000
            )
            sigma[mask] = predict_batch(model, rows).std(ddof=1)
        se = np.zeros(3)
        for i in range(3):
            var = 0.0
            for mask in range(8):
                if mask >> i & 1:
                    continue
                k = shapley_kernel_weight(bin(mask).count("1"), 3)
                var += k * k * (sigma[mask | (1 << i)] ** 2 + sigma[mask] ** 2)
            se[i] = gamma[i] * math.sqrt(var / config.mc_samples)
        err = np.abs(res.phi_causal - exact)
        bound = 3 * se + 1e-12
        worst_ratio = max(worst_ratio, float(np.max(err / np.maximum(bound, 1e-300))))
    report(
        8,
        worst_ratio <= 1.0,
        f"Monte Carlo phi_c within 3 standard errors of the exact oracle on 5 seeds "
        f"(worst |err|/bound = {worst_ratio:.2f})",
    )


def test_criterion_9_thread_determinism(tmp_path):
    cfg = {
        "dataset": {"builtin": "lung_cancer", "n": 600, "seed": 1},
        "split": {"test_fraction": 0.2, "seed": 1},
        "model": {"kind": "linear", "ridge_lambda": 50.0},
        "attribution": {"method": "causal", "seed": 1, "mc_samples": 32, "instances": 24},
        "output_dir": "",
    }
    blobs = []
    for threads in (1, 4):
        out = tmp_path / f"threads{threads}"
        cfg["output_dir"] = str(out)
        path = tmp_path / f"cfg{threads}.json"
        path.write_text(json.dumps(cfg), encoding="utf-8")
        assert cli_main(["attribute", "--config", str(path), "--threads", str(threads)]) == 0
        blobs.append((out / "attributions.json").read_bytes())
    report(9, blobs[0] == blobs[1], "attributions.json byte-identical at --threads 1 vs 4")


def test_criterion_10_insertion_benchmark(insertion_runs):
    causal = np.array([r["curves"]["causal"].aggregate["auroc"] for r in insertion_runs])
    marginal = np.array([r["curves"]["marginal"].aggregate["auroc"] for r in insertion_runs])
    random_ = np.array([r["curves"]["random"].aggregate["auroc"] for r in insertion_runs])
    gap = causal.mean() - random_.mean()
    wins = int((causal >= marginal).sum())
    report(
        10,
        gap >= 0.05 and wins >= 3,
        f"insertion AUROC: causal mean {causal.mean():.4f} - random mean {random_.mean():.4f} "
        f"= {gap:.4f} (>= 0.05); causal >= marginal in {wins}/5 seeds (>= 3)",
    )


def test_criterion_11_m_insensitivity(insertion_runs):
    run = insertion_runs[0]
    auroc_64 = run["curves"]["causal"].aggregate["auroc"]
    explainer = Explainer.build(
        run["split"].train,
        run["model"],
        SamplerConfig(seed=run["seed"], mc_samples=128),
        alpha=0.01,
    )
    matrix, _ = explainer.attribution_matrix(run["split"].test, "causal")
    order = global_importance(matrix)
    curve = insertion_curve(run["model"], run["split"].test, order, run["mask"])
    diff = abs(curve.aggregate["auroc"] - auroc_64)
    report(
        11,
        diff < 0.01,
        f"aggregate insertion AUROC at M=64 vs M=128 differs by {diff:.5f} (< 0.01)",
    )
