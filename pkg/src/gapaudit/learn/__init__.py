from gapaudit.learn.ensemble import Ensemble, ForestParams, GbtParams, fit_forest, fit_gbt
from gapaudit.learn.linear import RidgeModel, RidgeParams, Standardizer, fit_ridge
from gapaudit.learn.metrics import Metrics, evaluate, metrics_from_predictions
from gapaudit.learn.presets import PRESETS, ModelSpec, resolve_model
from gapaudit.learn.rng import Rng
from gapaudit.learn.split import SplitSpec, make_split
from gapaudit.learn.tree import RegressionTree, TreeParams, fit_tree

__all__ = [
    "PRESETS",
    "Ensemble",
    "ForestParams",
    "GbtParams",
    "Metrics",
    "ModelSpec",
    "RegressionTree",
    "RidgeModel",
    "RidgeParams",
    "Rng",
    "SplitSpec",
    "Standardizer",
    "TreeParams",
    "evaluate",
    "fit_forest",
    "fit_gbt",
    "fit_ridge",
    "fit_tree",
    "make_split",
    "metrics_from_predictions",
    "resolve_model",
]
