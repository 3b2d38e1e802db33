"""Shapley attribution engines: causal value function, Monte Carlo loop per
the accumulation scheme, exact brute force, and marginal/kernel baselines.

All randomness is derived from (seed, instance index, stream, ...) tuples,
so results are bit-identical regardless of evaluation order or worker count,
and two models explained under the same config see identical sampled rows
(the frozen-stream property behind the consistency guarantee).
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .datatable import DataTable
from .graphs import Cpdag
from .models import Baseline, predict_batch

_STREAM_SUBSET = 0
_STREAM_CAUSAL = 1
_STREAM_MARGINAL = 2
_STREAM_KERNEL = 3

EXHAUSTIVE_MAX_FEATURES = 12  # 2^12 = 4096 subsets replaces random draws


@dataclass(frozen=True)
class SamplerConfig:
    """Monte Carlo budget: M completions per value-function call (mc_samples)
    and T outer subset draws (mc_iterations).  The seed is mandatory."""

    seed: int
    mc_samples: int = 64
    mc_iterations: int = 512

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if self.mc_samples < 1 or self.mc_iterations < 1:
            raise ValueError("mc_samples and mc_iterations must be >= 1")


@dataclass(frozen=True)
class NodeRegression:
    parents: tuple[int, ...]  # feature positions
    coef: np.ndarray
    intercept: float
    sigma: float


@dataclass
class RegressionCache:
    """Sampling model per feature: root features keep their empirical training
    column as a marginal pool, non-roots a linear fit on their feature parents
    with residual sigma (n-1 divisor)."""

    feature_cols: tuple[int, ...]
    topo: tuple[int, ...]  # feature positions, parents before children
    marginals: dict[int, np.ndarray]
    regressions: dict[int, NodeRegression]
    records: list = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_cols)


def fit_node_regressions(train: DataTable, dag: Cpdag) -> RegressionCache:
    """Fit the per-node sampling model on the DAG extension.

    Only feature parents are used: a discovered edge target -> feature cannot
    be conditioned on at explanation time, so such parents are dropped (and
    recorded).  Singular fits fall back to a tiny ridge with a record.
    """
    if not dag.is_fully_directed():
        raise ValueError("fit_node_regressions expects a fully directed DAG")
    feature_cols = train.feature_indices
    col_to_feat = {c: f for f, c in enumerate(feature_cols)}
    records: list = []
    marginals: dict[int, np.ndarray] = {}
    regressions: dict[int, NodeRegression] = {}
    for f, col in enumerate(feature_cols):
        parent_cols = dag.parents(col)
        kept = [c for c in parent_cols if c != train.target_index]
        if len(kept) < len(parent_cols):
            records.append({"feature": train.column_names[col], "dropped_target_parent": True})
        if not kept:
            marginals[f] = train.values[:, col].copy()
            continue
        X = np.column_stack([train.values[:, c] for c in kept] + [np.ones(train.row_count)])
        y = train.values[:, col]
        coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        if rank < X.shape[1]:
            gram = X.T @ X + 1e-6 * np.eye(X.shape[1])
            coef = np.linalg.solve(gram, X.T @ y)
            records.append({"feature": train.column_names[col], "ridge_fallback": True})
        resid = y - X @ coef
        sigma = float(resid.std(ddof=1)) if train.row_count > 1 else 0.0
        regressions[f] = NodeRegression(
            parents=tuple(col_to_feat[c] for c in kept),
            coef=coef[:-1],
            intercept=float(coef[-1]),
            sigma=sigma,
        )
    order = [col_to_feat[c] for c in dag.topological_order() if c in col_to_feat]
    return RegressionCache(feature_cols, tuple(order), marginals, regressions, records)


def sample_out_of_coalition(x, coalition, cache: RegressionCache, rng, size=None):
    """Complete a row: coalition features stay at x (incoming edges severed),
    the rest are drawn in topological order from the fitted mechanisms.

    With size=None a single row is returned, otherwise a (size, n) matrix of
    independent completions.
    """
    single = size is None
    m = 1 if single else size
    x = np.asarray(x, dtype=np.float64)
    rows = np.tile(x, (m, 1))
    members = set(coalition)
    for f in cache.topo:
        if f in members:
            continue
        if f in cache.marginals:
            pool = cache.marginals[f]
            rows[:, f] = pool[rng.integers(0, pool.shape[0], size=m)]
        else:
            reg = cache.regressions[f]
            mu = rows[:, list(reg.parents)] @ reg.coef + reg.intercept
            rows[:, f] = rng.normal(mu, reg.sigma)
    return rows[0] if single else rows


def causal_value_function(model, x, coalition, cache: RegressionCache, M: int, rng) -> float:
    """(1/M) sum of model outputs over M causally consistent completions."""
    if M < 1:
        raise ValueError("M must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if len(set(coalition)) == cache.n_features:
        return float(predict_batch(model, x[None, :])[0])
    rows = sample_out_of_coalition(x, coalition, cache, rng, size=M)
    return float(predict_batch(model, rows).mean())


def shapley_kernel_weight(subset_size: int, n: int) -> float:
    """|S|! (n - |S| - 1)! / n! for a subset not containing the player."""
    return math.factorial(subset_size) * math.factorial(n - subset_size - 1) / math.factorial(n)


@dataclass
class AttributionResult:
    feature_names: tuple[str, ...]
    phi_causal: np.ndarray
    phi_normalized: np.ndarray
    prediction: float
    baseline: float
    gamma: np.ndarray
    flags: tuple[str, ...]
    config: SamplerConfig
    instance_index: int = 0
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return {
            "instance_index": self.instance_index,
            "phi_causal": self.phi_causal.tolist(),
            "phi_normalized": self.phi_normalized.tolist(),
            "prediction": self.prediction,
            "baseline": self.baseline,
            "gamma": {n: float(g) for n, g in zip(self.feature_names, self.gamma)},
            "flags": list(self.flags),
            "config": {
                "seed": self.config.seed,
                "mc_samples": self.config.mc_samples,
                "mc_iterations": self.config.mc_iterations,
            },
        }


def normalize(phi_causal: np.ndarray, prediction: float, baseline: float):
    """phi_n = phi_c * (f(x) - E[f(X)]) / sum(phi_c).

    When the accumulated total is zero or negligible against the largest
    component, the division is undefined; the raw vector is returned with a
    degenerate flag instead.
    """
    phi_causal = np.asarray(phi_causal, dtype=np.float64)
    total = float(phi_causal.sum())
    scale = float(np.abs(phi_causal).max()) if phi_causal.size else 0.0
    if scale == 0.0 or abs(total) < 1e-12 * scale:
        return phi_causal.copy(), True
    # divide first: the guard bounds |phi/total| by 1e12, avoiding overflow
    return (phi_causal / total) * (prediction - baseline), False


def _uniform_subset(rng, n: int) -> int:
    """Each feature included independently with probability 1/2."""
    mask = 0
    draws = rng.random(n)
    for i in range(n):
        if draws[i] < 0.5:
            mask |= 1 << i
    return mask


def _mask_members(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if mask >> i & 1)


def causal_shap(
    model,
    x,
    gamma: np.ndarray,
    cache: RegressionCache,
    config: SamplerConfig,
    baseline: Baseline,
    instance_index: int = 0,
    feature_names: tuple[str, ...] | None = None,
) -> AttributionResult:
    """Causally weighted Shapley attribution for one instance.

    Up to EXHAUSTIVE_MAX_FEATURES the outer loop enumerates every subset once
    (each with its own derived sample stream); above that it draws T uniform
    random subsets and accumulates kernel-weighted contrasts without dividing
    by visit counts -- the scale is arbitrary and removed by normalisation.
    An all-zero gamma (no causal signal) falls back to uniform weights with a
    flag rather than failing.
    """
    start = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    n = cache.n_features
    gamma = np.asarray(gamma, dtype=np.float64)
    flags: list[str] = []
    if gamma.shape != (n,):
        raise ValueError(f"gamma has shape {gamma.shape}, expected ({n},)")
    if gamma.sum() == 0.0:
        gamma = np.full(n, 1.0 / n)
        flags.append("no_causal_signal")

    if n <= EXHAUSTIVE_MAX_FEATURES:
        full = (1 << n) - 1

        def build_rows(mask, rng):
            if mask == full:
                return x[None, :]
            return sample_out_of_coalition(
                x, _mask_members(mask, n), cache, rng, size=config.mc_samples
            )

        raw = _exhaustive_phi(build_rows, model, n, config, instance_index, _STREAM_CAUSAL)
        phi_causal = gamma * raw
    else:
        phi_causal = _sampled_phi_accumulate(model, x, gamma, cache, config, instance_index)

    prediction = float(predict_batch(model, x[None, :])[0])
    phi_normalized, degenerate = normalize(phi_causal, prediction, baseline.expected_prediction)
    if degenerate:
        flags.append("degenerate_normalization")
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(n))
    return AttributionResult(
        feature_names=tuple(feature_names),
        phi_causal=phi_causal,
        phi_normalized=phi_normalized,
        prediction=prediction,
        baseline=baseline.expected_prediction,
        gamma=gamma,
        flags=tuple(flags),
        config=config,
        instance_index=instance_index,
        wall_time=time.perf_counter() - start,
    )


def _combine_exhaustive(values: np.ndarray, n: int) -> np.ndarray:
    """Kernel-weighted contrast sums over every subset, sharing each subset's
    estimated value across features: the exact Shapley combination of the
    estimated values."""
    kernels = [shapley_kernel_weight(s, n) for s in range(n)]
    phi = np.zeros(n)
    for mask in range(1 << n):
        size = bin(mask).count("1")
        for i in range(n):
            if mask >> i & 1:
                continue
            phi[i] += kernels[size] * (values[mask | (1 << i)] - values[mask])
    return phi


def _exhaustive_phi(build_rows, model, n: int, config: SamplerConfig, instance_index: int, stream: int):
    """Estimate every subset's value (each from its own derived stream) with
    one batched model call, then combine.

    ``build_rows(mask, rng)`` returns the completion rows whose prediction
    mean estimates that subset's value.
    """
    counts = np.empty(1 << n, dtype=np.int64)
    blocks = []
    for mask in range(1 << n):
        rng = np.random.default_rng((config.seed, instance_index, stream, mask))
        rows = build_rows(mask, rng)
        counts[mask] = rows.shape[0]
        blocks.append(rows)
    preds = predict_batch(model, np.concatenate(blocks, axis=0))
    values = np.empty(1 << n)
    pos = 0
    for mask in range(1 << n):
        values[mask] = preds[pos : pos + counts[mask]].mean()
        pos += counts[mask]
    return _combine_exhaustive(values, n)


def _sampled_phi_accumulate(model, x, gamma, cache, config, instance_index):
    """T uniform subset draws; per (t, i) contrast pairs evaluated on their own
    derived streams so any subset of tasks can run in any order."""
    n = cache.n_features
    phi = np.zeros(n)
    for t in range(config.mc_iterations):
        rng_t = np.random.default_rng((config.seed, instance_index, _STREAM_SUBSET, t))
        mask = _uniform_subset(rng_t, n)
        members = _mask_members(mask, n)
        size = len(members)
        for i in range(n):
            if mask >> i & 1 or gamma[i] == 0.0:
                continue
            rng_s = np.random.default_rng((config.seed, instance_index, _STREAM_CAUSAL, t, i, 0))
            rng_si = np.random.default_rng((config.seed, instance_index, _STREAM_CAUSAL, t, i, 1))
            v_s = causal_value_function(model, x, members, cache, config.mc_samples, rng_s)
            v_si = causal_value_function(
                model, x, members + (i,), cache, config.mc_samples, rng_si
            )
            phi[i] += shapley_kernel_weight(size, n) * gamma[i] * (v_si - v_s)
    return phi


def exact_shapley(value_function, n: int, gamma=None) -> np.ndarray:
    """Brute-force Shapley values over all 2^n coalitions.

    ``value_function`` receives a tuple of member indices.  Each coalition is
    evaluated exactly once.  With ``gamma`` the per-feature weight factors are
    applied (the exact analogue of the causally weighted accumulation).
    """
    if n > 20:
        raise ValueError(f"exact enumeration over 2^{n} coalitions refused (n > 20)")
    values: dict[int, float] = {}
    for mask in range(1 << n):
        values[mask] = float(value_function(_mask_members(mask, n)))
    kernels = [shapley_kernel_weight(s, n) for s in range(n)]
    phi = np.zeros(n)
    for mask in range(1 << n):
        size = bin(mask).count("1")
        for i in range(n):
            if mask >> i & 1:
                continue
            phi[i] += kernels[size] * (values[mask | (1 << i)] - values[mask])
    if gamma is not None:
        phi = np.asarray(gamma, dtype=np.float64) * phi
    return phi


def marginal_pools(train: DataTable) -> list[np.ndarray]:
    return [train.values[:, c] for c in train.feature_indices]


def _sample_marginal_batch(x, coalition, pools, rng, M):
    rows = np.tile(np.asarray(x, dtype=np.float64), (M, 1))
    members = set(coalition)
    for f in range(len(pools)):
        if f in members:
            continue
        pool = pools[f]
        rows[:, f] = pool[rng.integers(0, pool.shape[0], size=M)]
    return rows


def marginal_value_function(model, x, coalition, pools, M, rng) -> float:
    """Interventional value with out-of-coalition features drawn independently
    from the training marginals (no graph)."""
    if len(set(coalition)) == len(pools):
        return float(predict_batch(model, np.asarray(x)[None, :])[0])
    rows = _sample_marginal_batch(x, coalition, pools, rng, M)
    return float(predict_batch(model, rows).mean())


def marginal_shap_baseline(
    model, x, train: DataTable, config: SamplerConfig, instance_index: int = 0
) -> np.ndarray:
    """Plain-kernel Shapley attribution under the feature-independence
    assumption.  The sampled mode rescales the accumulator by 2^n / T, making
    it an unbiased estimate of the unweighted Shapley value (the causal path
    leaves scale to normalisation instead)."""
    x = np.asarray(x, dtype=np.float64)
    pools = marginal_pools(train)
    n = len(pools)
    if n <= EXHAUSTIVE_MAX_FEATURES:
        full = (1 << n) - 1

        def build_rows(mask, rng):
            if mask == full:
                return x[None, :]
            return _sample_marginal_batch(
                x, _mask_members(mask, n), pools, rng, config.mc_samples
            )

        return _exhaustive_phi(build_rows, model, n, config, instance_index, _STREAM_MARGINAL)
    phi = np.zeros(n)
    for t in range(config.mc_iterations):
        rng_t = np.random.default_rng((config.seed, instance_index, _STREAM_SUBSET, t))
        mask = _uniform_subset(rng_t, n)
        members = _mask_members(mask, n)
        size = len(members)
        for i in range(n):
            if mask >> i & 1:
                continue
            rng_s = np.random.default_rng((config.seed, instance_index, _STREAM_MARGINAL, t, i, 0))
            rng_si = np.random.default_rng((config.seed, instance_index, _STREAM_MARGINAL, t, i, 1))
            v_s = marginal_value_function(model, x, members, pools, config.mc_samples, rng_s)
            v_si = marginal_value_function(
                model, x, members + (i,), pools, config.mc_samples, rng_si
            )
            phi[i] += shapley_kernel_weight(size, n) * (v_si - v_s)
    return phi * (2.0**n / config.mc_iterations)


def kernel_shap_weight(n: int, size: int) -> float:
    """pi(S) = (n - 1) / (C(n, |S|) |S| (n - |S|)) for proper subsets."""
    if size <= 0 or size >= n:
        raise ValueError("kernel weight is defined for proper nonempty subsets")
    return (n - 1) / (math.comb(n, size) * size * (n - size))


def kernel_shap_baseline(
    model,
    x,
    train: DataTable,
    n_coalitions: int,
    seed: int,
    mc_samples: int = 64,
    value_function=None,
    instance_index: int = 0,
) -> np.ndarray:
    """Weighted least squares on coalition indicators with the Shapley kernel.

    Empty and full coalitions enter as hard constraints (v(empty) anchors the
    intercept, the efficiency gap fixes the last coefficient).  When all
    proper subsets fit inside n_coalitions they are enumerated, which makes
    the solution exact for the supplied value function; otherwise subsets are
    sampled uniformly.  ``value_function(members, rng) -> float`` defaults to
    marginal sampling.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(train.feature_indices)
    if n < 2:
        raise ValueError("kernel SHAP needs at least 2 features")
    if n_coalitions < n + 2:
        raise ValueError(f"need n_coalitions >= n + 2 = {n + 2}, got {n_coalitions}")

    if n <= 20 and (1 << n) - 2 <= n_coalitions:
        masks = [m for m in range(1, (1 << n) - 1)]
    else:
        rng = np.random.default_rng((seed, instance_index, _STREAM_KERNEL, 0))
        masks = []
        while len(masks) < n_coalitions:
            mask = _uniform_subset(rng, n)
            if 0 < mask < (1 << n) - 1:
                masks.append(mask)
    unique_masks = sorted(set(masks))

    if value_function is None:
        # batch all coalition completions through one model call
        pools = marginal_pools(train)
        query = [0, (1 << n) - 1, *unique_masks]
        blocks = []
        for mask in query:
            rng = np.random.default_rng((seed, instance_index, _STREAM_KERNEL, 1, mask))
            if mask == (1 << n) - 1:
                blocks.append(x[None, :])
            else:
                blocks.append(
                    _sample_marginal_batch(x, _mask_members(mask, n), pools, rng, mc_samples)
                )
        preds = predict_batch(model, np.concatenate(blocks, axis=0))
        means = []
        pos = 0
        for block in blocks:
            means.append(preds[pos : pos + block.shape[0]].mean())
            pos += block.shape[0]
        v_empty, v_full = means[0], means[1]
        v = np.array(means[2:])
    else:
        def evaluate(mask):
            rng = np.random.default_rng((seed, instance_index, _STREAM_KERNEL, 1, mask))
            return value_function(_mask_members(mask, n), rng)

        v_empty = evaluate(0)
        v_full = evaluate((1 << n) - 1)
        v = np.array([evaluate(m) for m in unique_masks])
    counts = {m: 0 for m in unique_masks}
    for m in masks:
        counts[m] += 1
    Z = np.array([[m >> i & 1 for i in range(n)] for m in unique_masks], dtype=np.float64)
    weights = np.array(
        [counts[m] * kernel_shap_weight(n, int(Z[r].sum())) for r, m in enumerate(unique_masks)]
    )
    gap = v_full - v_empty
    # eliminate the last coefficient via the efficiency constraint
    target = v - v_empty - Z[:, n - 1] * gap
    design = Z[:, : n - 1] - Z[:, [n - 1]]
    sw = np.sqrt(weights)
    A = design * sw[:, None]
    b = target * sw
    coef, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < n - 1:
        raise np.linalg.LinAlgError(
            f"rank-deficient coalition design: rank {rank} < {n - 1}; "
            f"{len(unique_masks)} distinct coalitions cannot identify {n} features"
        )
    phi = np.empty(n)
    phi[: n - 1] = coef
    phi[n - 1] = gap - coef.sum()
    return phi


def make_exact_marginal_value(model, background: np.ndarray, x):
    """Deterministic interventional value function: average the model over all
    background rows with coalition features pinned to x."""
    background = np.asarray(background, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)

    def value(members, rng=None) -> float:
        rows = background.copy()
        for i in members:
            rows[:, i] = x[i]
        return float(predict_batch(model, rows).mean())

    return value
