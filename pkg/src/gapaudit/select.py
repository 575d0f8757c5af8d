"""Variance/correlation pruning, gain-based ranking and the subset-size sweep."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from gapaudit.features.matrix import FeatureMatrix
from gapaudit.learn.ensemble import GbtParams, fit_gbt
from gapaudit.learn.metrics import evaluate
from gapaudit.learn.presets import ModelSpec, resolve_model
from gapaudit.learn.split import SplitSpec


class SelectionError(ValueError):
    pass


@dataclass
class SelectConfig:
    variance_threshold: float = 0.001
    correlation_cutoff: float = 0.95
    sweep_start: int = 10
    sweep_step: int = 5
    # XGBoost's stock settings: 100 rounds, eta 0.3, depth 6
    ranking_model: GbtParams = field(default_factory=lambda: GbtParams(n_estimators=100, learning_rate=0.3, max_depth=6))

    def __post_init__(self):
        if self.variance_threshold < 0:
            raise ValueError("variance_threshold must be >= 0")
        if not 0 < self.correlation_cutoff <= 1:
            raise ValueError("correlation_cutoff must lie in (0, 1]")
        if self.sweep_step < 1 or self.sweep_start < 1:
            raise ValueError("sweep_start and sweep_step must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SweepResult:
    rows: list[dict]
    best_size: int

    def to_json(self) -> dict:
        return {"sweep": self.rows, "best_size": self.best_size}


def variance_filter(m: FeatureMatrix, threshold: float = 0.001) -> tuple[FeatureMatrix, list[str]]:
    """Drop columns whose population variance is below ``threshold`` (constant columns always)."""
    if m.n == 0 or m.p == 0:
        raise SelectionError("empty matrix")
    var = m.rows.var(axis=0)
    const = np.ptp(m.rows, axis=0) == 0
    drop = (var < threshold) | const
    if drop.all():
        raise SelectionError("variance filter removed every column")
    dropped = [c for c, d in zip(m.column_names, drop) if d]
    return m.drop(dropped), dropped


def correlation_filter(m: FeatureMatrix, cutoff: float = 0.95) -> tuple[FeatureMatrix, list[tuple[str, str]]]:
    """Left-to-right scan dropping any column with |Pearson r| >= ``cutoff`` against a kept one.

    Returns the pruned matrix and ``(kept, dropped)`` pairs.
    """
    if m.n < 2:
        raise SelectionError("correlation filter needs at least two rows")
    flat = [c for c, rng in zip(m.column_names, np.ptp(m.rows, axis=0)) if rng == 0]
    if flat:
        raise SelectionError(f"zero-variance column(s) {flat}: run the variance filter first")
    corr = np.atleast_2d(np.corrcoef(m.rows, rowvar=False))
    kept: list[int] = []
    pairs: list[tuple[str, str]] = []
    for j in range(m.p):
        hit = next((i for i in kept if abs(corr[i, j]) >= cutoff), None)
        if hit is None:
            kept.append(j)
        else:
            pairs.append((m.column_names[hit], m.column_names[j]))
    return m.select([m.column_names[j] for j in kept]), pairs


def importance_ranking(m: FeatureMatrix, cfg: SelectConfig | None = None) -> list[tuple[str, float]]:
    """Columns ordered by total split gain of one boosted fit; unused columns trail with gain 0."""
    cfg = cfg or SelectConfig()
    model = fit_gbt(m.rows, m.target, cfg.ranking_model)
    gains = model.feature_gains(m.p)
    order = sorted(range(m.p), key=lambda i: (-gains[i], i))
    return [(m.column_names[i], float(gains[i])) for i in order]


def sweep_sizes(p: int, start: int, step: int) -> list[int]:
    sizes = list(range(start, p + 1, step))
    if not sizes or sizes[-1] != p:
        sizes.append(p)
    return sizes


def subset_sweep(m: FeatureMatrix, ranking, cfg: SelectConfig | None, split: SplitSpec, model_cfg="xgb-conservative") -> SweepResult:
    """Fit ``model_cfg`` on the top-k ranked columns for each k and score on the fixed test split."""
    cfg = cfg or SelectConfig()
    spec: ModelSpec = resolve_model(model_cfg)
    names = [r[0] if isinstance(r, (tuple, list)) else r for r in ranking]
    if sorted(names) != sorted(m.column_names):
        raise SelectionError("ranking must cover every column exactly once")
    tr, te = split.train_indices, split.test_indices
    rows = []
    for k in sweep_sizes(m.p, cfg.sweep_start, cfg.sweep_step):
        sub = m.select(names[:k])
        model = spec.fit(sub.rows[tr], sub.target[tr])
        met = evaluate(model, sub.rows[te], sub.target[te])
        rows.append({"k": k, "r2": met.r2, "mae": met.mae, "mse": met.mse})
    best = max(rows, key=lambda r: (r["r2"] if r["r2"] is not None else -np.inf, -r["k"]))
    return SweepResult(rows, best["k"])
