"""Incremental feature-impact audit for target leakage.

Protocol: categorize descriptors by leakage risk, train a baseline on the
low/medium-risk set, re-train with each high-risk candidate added on the
same split, and flag candidates whose improvement is implausibly large.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from gapaudit.features.matrix import FeatureMatrix
from gapaudit.learn.metrics import Metrics, evaluate
from gapaudit.learn.presets import ModelSpec, resolve_model
from gapaudit.learn.split import SplitSpec

HIGH, MEDIUM, LOW = "high", "medium", "low"


class LeakageProtocolError(ValueError):
    pass


@dataclass
class RiskRegistry:
    levels: dict[str, str]
    rationale: dict[str, str] = field(default_factory=dict)
    default_level: str = LOW

    def level(self, name: str) -> str:
        return self.levels.get(name, self.default_level)

    def high_risk(self) -> list[str]:
        return [k for k, v in self.levels.items() if v == HIGH]

    def to_json(self) -> dict:
        return {"levels": dict(self.levels), "rationale": dict(self.rationale), "default_level": self.default_level}


def default_registry() -> RiskRegistry:
    why = {
        HIGH: "derived from band-structure curvature; can encode the target",
        MEDIUM: "independent perturbation response; physically correlated, no mathematical encoding",
        LOW: "intrinsic structural or thermodynamic quantity",
    }
    levels = {"avg_elec_mass": HIGH, "avg_hole_mass": HIGH, "epsx": MEDIUM, "epsy": MEDIUM, "epsz": MEDIUM}
    for name in (
        "formation_energy_per_atom",
        "density",
        "nat",
        "bulk_modulus_kv",
        "shear_modulus_gv",
        "poisson",
        "ehull",
        "max_efg",
        "spg_number",
        "is_3D",
        "dimensionality",
    ):
        levels[name] = LOW
    return RiskRegistry(levels, {k: why[v] for k, v in levels.items()})


@dataclass
class FlagThresholds:
    min_delta_r2: float = 0.05
    min_mae_reduction: float = 0.25

    def __post_init__(self):
        if self.min_delta_r2 < 0 or self.min_mae_reduction < 0:
            raise ValueError("thresholds must be >= 0")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class CandidateEntry:
    feature: str
    metrics: dict[str, Metrics]
    delta_r2: dict[str, float]
    mae_ratio: dict[str, float]
    verdict: str = "clean"

    def to_json(self) -> dict:
        return {
            "feature": self.feature,
            "metrics": {k: m.to_json() for k, m in self.metrics.items()},
            "delta_r2": self.delta_r2,
            "mae_ratio": self.mae_ratio,
            "verdict": self.verdict,
        }


@dataclass
class LeakageReport:
    thresholds: FlagThresholds
    baseline: dict[str, Metrics]
    candidates: list[CandidateEntry]
    n_rows: int = 0
    baseline_columns: list[str] = field(default_factory=list)

    @property
    def verdicts(self) -> dict[str, str]:
        return {c.feature: c.verdict for c in self.candidates}

    def to_json(self) -> dict:
        return {
            "thresholds": self.thresholds.to_json(),
            "n_rows": self.n_rows,
            "baseline_columns": self.baseline_columns,
            "baseline": {k: m.to_json() for k, m in self.baseline.items()},
            "candidates": [c.to_json() for c in self.candidates],
        }


def _fit_eval(spec: ModelSpec, m: FeatureMatrix, split: SplitSpec) -> Metrics:
    tr, te = split.train_indices, split.test_indices
    model = spec.fit(m.rows[tr], m.target[tr])
    return evaluate(model, m.rows[te], m.target[te])


def baseline_eval(matrix: FeatureMatrix, models, split: SplitSpec, registry: RiskRegistry | None = None) -> dict[str, Metrics]:
    """Test metrics per model on a matrix that must hold no high-risk column."""
    registry = registry or default_registry()
    bad = [c for c in matrix.column_names if registry.level(c) == HIGH]
    if bad:
        raise LeakageProtocolError(f"high-risk column(s) {bad} present in the baseline matrix")
    specs = [resolve_model(m) for m in models]
    return {s.name: _fit_eval(s, matrix, split) for s in specs}


def incremental_impact(
    base_matrix: FeatureMatrix, name: str, column, models, split: SplitSpec, baseline: dict[str, Metrics]
) -> CandidateEntry:
    """Re-fit every model with one candidate column appended; compare with ``baseline``."""
    if name in base_matrix.column_names:
        raise LeakageProtocolError(f"candidate {name!r} already in the baseline matrix")
    column = np.asarray(column, dtype=float)
    if column.shape[0] != base_matrix.n:
        raise LeakageProtocolError(f"candidate {name!r} has {column.shape[0]} rows, baseline has {base_matrix.n}")
    m = base_matrix.with_column(name, column)
    specs = [resolve_model(s) for s in models]
    metrics = {s.name: _fit_eval(s, m, split) for s in specs}
    delta = {}
    ratio = {}
    for k, met in metrics.items():
        base = baseline[k]
        delta[k] = (met.r2 - base.r2) if met.r2 is not None and base.r2 is not None else math.nan
        ratio[k] = met.mae / base.mae if base.mae > 0 else math.inf
    return CandidateEntry(name, metrics, delta, ratio)


def flag(entries: list[CandidateEntry], thresholds: FlagThresholds | None = None) -> dict[str, str]:
    """A candidate is flagged when at least half the models (rounded up) pass both thresholds."""
    thresholds = thresholds or FlagThresholds()
    verdicts = {}
    for e in entries:
        votes = sum(
            1
            for k in e.delta_r2
            if e.delta_r2[k] >= thresholds.min_delta_r2 and (1.0 - e.mae_ratio[k]) >= thresholds.min_mae_reduction
        )
        needed = math.ceil(len(e.delta_r2) / 2)
        e.verdict = "flagged" if len(e.delta_r2) and votes >= needed else "clean"
        verdicts[e.feature] = e.verdict
    return verdicts


def run_audit(
    matrix: FeatureMatrix,
    candidates: list[str],
    models,
    split: SplitSpec,
    registry: RiskRegistry | None = None,
    thresholds: FlagThresholds | None = None,
) -> LeakageReport:
    """Baseline on every non-candidate column, then one re-fit per candidate."""
    registry = registry or default_registry()
    thresholds = thresholds or FlagThresholds()
    base = matrix.drop(candidates)
    baseline = baseline_eval(base, models, split, registry)
    entries = [incremental_impact(base, c, matrix.column(c), models, split, baseline) for c in candidates]
    flag(entries, thresholds)
    return LeakageReport(thresholds, baseline, entries, n_rows=matrix.n, baseline_columns=base.column_names)
