"""Named model configurations and a small fit dispatcher."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from gapaudit.learn.ensemble import ForestParams, GbtParams, fit_forest, fit_gbt
from gapaudit.learn.linear import RidgeParams, fit_ridge
from gapaudit.learn.tree import TreeParams


@dataclass(frozen=True)
class ModelSpec:
    name: str
    family: str  # ridge | random_forest | xgboost | catboost
    params: RidgeParams | ForestParams | GbtParams
    # vendor settings with no counterpart in the plain learner, kept for the record only
    inert: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        if isinstance(self.params, RidgeParams):
            return "ridge"
        if isinstance(self.params, ForestParams):
            return "forest"
        return "gbt"

    @property
    def is_tree_model(self) -> bool:
        return self.kind != "ridge"

    def fit(self, X, y):
        if self.kind == "ridge":
            return fit_ridge(X, y, self.params)
        if self.kind == "forest":
            return fit_forest(X, y, self.params)
        return fit_gbt(X, y, self.params)

    def with_overrides(self, **kw) -> "ModelSpec":
        """Copy with parameter overrides; ``max_depth``/``min_samples_leaf`` reach a forest's tree."""
        if not kw:
            return self
        params = self.params
        if isinstance(params, ForestParams):
            tree_kw = {k: kw.pop(k) for k in ("max_depth", "min_samples_leaf", "min_samples_split") if k in kw}
            if tree_kw:
                params = dataclasses.replace(params, tree=dataclasses.replace(params.tree, **tree_kw))
        params = dataclasses.replace(params, **kw)
        return dataclasses.replace(self, params=params)

    def to_json(self) -> dict:
        return {"name": self.name, "family": self.family, "kind": self.kind, "params": self.params.to_json(), "inert": self.inert}


def _rf(name, n, depth, leaf=1):
    return ModelSpec(name, "random_forest", ForestParams(n_estimators=n, tree=TreeParams(max_depth=depth, min_samples_leaf=leaf), seed=42))


def _gbt(name, family, n, lr, depth, **inert):
    return ModelSpec(name, family, GbtParams(n_estimators=n, learning_rate=lr, max_depth=depth, seed=42), inert=dict(inert))


PRESETS: dict[str, ModelSpec] = {
    s.name: s
    for s in [
        ModelSpec("ridge", "ridge", RidgeParams(alpha=1.0)),
        _rf("rf-conservative", 500, 13, leaf=5),
        _rf("rf-balanced", 600, None),
        _rf("rf-aggressive", 700, None, leaf=1),
        _gbt("xgb-conservative", "xgboost", 500, 0.05, 6),
        _gbt("xgb-balanced", "xgboost", 600, 0.10, 8),
        _gbt("xgb-aggressive", "xgboost", 700, 0.30, 6),
        _gbt("cat-conservative", "catboost", 1000, 0.01, 6, l2_leaf_reg=5),
        _gbt("cat-balanced", "catboost", 3000, 0.05, 10, l2_leaf_reg=1),
        _gbt("cat-aggressive", "catboost", 2000, 0.03, 8, l2_leaf_reg=3),
    ]
}


def resolve_model(entry) -> ModelSpec:
    """Accept a preset name, ``{"preset": name, **overrides}``, or a ModelSpec."""
    if isinstance(entry, ModelSpec):
        return entry
    if isinstance(entry, str):
        if entry not in PRESETS:
            raise KeyError(f"unknown model preset {entry!r}; known: {sorted(PRESETS)}")
        return PRESETS[entry]
    entry = dict(entry)
    spec = resolve_model(entry.pop("preset"))
    name = entry.pop("name", spec.name)
    return dataclasses.replace(spec.with_overrides(**entry), name=name)
