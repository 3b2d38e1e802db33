"""End-to-end wiring: discovery, effects, sampling cache, and per-instance
attribution, with a deterministic thread map over instances."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attribution import (
    AttributionResult,
    RegressionCache,
    SamplerConfig,
    causal_shap,
    exact_shapley,
    kernel_shap_baseline,
    make_exact_marginal_value,
    marginal_shap_baseline,
    normalize,
)
from .datatable import DataTable
from .discovery import pc
from .effects import CausalEffects, estimate_effects
from .graphs import Cpdag
from .models import Baseline, expected_prediction, predict_batch

METHODS = ("causal", "marginal", "kernel", "exact")


@dataclass
class Explainer:
    """Frozen pipeline state for explaining test instances of one dataset."""

    train: DataTable
    model: object
    baseline: Baseline
    cpdag: Cpdag
    effects: CausalEffects
    cache: RegressionCache
    config: SamplerConfig

    @staticmethod
    def build(
        train: DataTable,
        model,
        config: SamplerConfig,
        alpha: float = 0.05,
        max_cond_size: int | None = None,
    ) -> "Explainer":
        from .attribution import fit_node_regressions

        cpdag = pc(train, alpha=alpha, max_cond_size=max_cond_size)
        effects = estimate_effects(train, cpdag)
        cache = fit_node_regressions(train, effects.extension)
        return Explainer(
            train=train,
            model=model,
            baseline=expected_prediction(model, train),
            cpdag=cpdag,
            effects=effects,
            cache=cache,
            config=config,
        )

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.train.feature_names

    def explain_causal(self, x, instance_index: int = 0) -> AttributionResult:
        return causal_shap(
            self.model,
            x,
            self.effects.gamma,
            self.cache,
            self.config,
            self.baseline,
            instance_index=instance_index,
            feature_names=self.feature_names,
        )

    def explain_marginal(self, x, instance_index: int = 0) -> np.ndarray:
        return marginal_shap_baseline(self.model, x, self.train, self.config, instance_index)

    def explain_kernel(self, x, instance_index: int = 0) -> np.ndarray:
        n = len(self.feature_names)
        n_coalitions = max(n + 2, min((1 << n) - 2, 2048)) if n < 20 else 2048
        return kernel_shap_baseline(
            self.model,
            x,
            self.train,
            n_coalitions=n_coalitions,
            seed=self.config.seed,
            mc_samples=self.config.mc_samples,
            instance_index=instance_index,
        )

    def explain_exact(self, x, instance_index: int = 0) -> np.ndarray:
        n = len(self.feature_names)
        value = make_exact_marginal_value(self.model, self.train.feature_matrix(), x)
        return exact_shapley(value, n)

    def attribution_matrix(self, test: DataTable, method: str, threads: int = 1):
        """Per-instance attribution rows for a test table.

        For the causal method the matrix holds phi_normalized and the full
        AttributionResult list rides along; baselines return plain vectors.
        Rows depend only on (instance, config), so the thread count cannot
        change the output.
        """
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
        X = test.feature_matrix()
        explain = {
            "causal": self.explain_causal,
            "marginal": self.explain_marginal,
            "kernel": self.explain_kernel,
            "exact": self.explain_exact,
        }[method]

        def task(i):
            return explain(X[i], instance_index=i)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(task, range(X.shape[0])))
        else:
            results = [task(i) for i in range(X.shape[0])]
        if method == "causal":
            matrix = np.array([r.phi_normalized for r in results])
            return matrix, results
        return np.array(results), None

    def predictions(self, table: DataTable) -> np.ndarray:
        return predict_batch(self.model, table.feature_matrix())


def normalized_from_vector(phi, prediction, baseline):
    """Apply the closing normalisation to a raw attribution vector."""
    return normalize(np.asarray(phi), prediction, baseline)
