"""Causality-aware Shapley feature attribution.

Pipeline: constraint-based graph discovery (PC), per-edge causal strength
and total effects on the target (local intervention calculus), then Shapley
attribution with a causal value function and causally discounted kernel
weights, next to marginal, kernel and exact brute-force baselines.
"""

from .attribution import (
    AttributionResult,
    SamplerConfig,
    causal_shap,
    causal_value_function,
    exact_shapley,
    fit_node_regressions,
    kernel_shap_baseline,
    marginal_shap_baseline,
    normalize,
    sample_out_of_coalition,
)
from .datatable import DataTable, Split, column_stats, load_csv, save_csv, train_test_split
from .discovery import (
    CiTestResult,
    apply_meek_rules,
    dag_to_cpdag,
    fisher_z_test,
    orient_v_structures,
    partial_correlation,
    pc,
    pc_skeleton,
)
from .effects import (
    CausalEffects,
    causal_weight_factors,
    edge_weight,
    estimate_effects,
    ida_effect_multiset,
    total_effect,
)
from .evaluation import (
    auroc,
    brier,
    cross_entropy,
    global_importance,
    insertion_curve,
    reduced_feature_ground_truth,
    rmse,
)
from .external import ExternalModel, external_predict
from .forest import RandomForestModel, train_random_forest
from .graphs import Cpdag, DsepOracle, consistent_dag_extension, enumerate_simple_paths
from .models import (
    Baseline,
    LinearModel,
    expected_prediction,
    load_model,
    predict_batch,
    save_model,
    train_linear,
)
from .pipeline import Explainer
from .sem import (
    SemSpec,
    builtin_table,
    cardio_spec,
    classification_spec,
    lung_cancer_spec,
    sample_classification,
    sample_sem,
)

__version__ = "0.1.0"
