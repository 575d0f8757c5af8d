from gapaudit.features.descriptors import (
    PHASE1_COLUMNS,
    PHASE2_COLUMNS,
    PHASE3_COLUMNS,
    FeatureConfig,
    FeatureError,
    build_matrix,
    elemental_stats,
    phase1_features,
    phase2_features,
    phase3_descriptors,
)
from gapaudit.features.elements import ElementProps, ElementTable, default_table
from gapaudit.features.formula import Composition, FormulaError, parse_formula
from gapaudit.features.matrix import FeatureMatrix

__all__ = [
    "PHASE1_COLUMNS",
    "PHASE2_COLUMNS",
    "PHASE3_COLUMNS",
    "Composition",
    "ElementProps",
    "ElementTable",
    "FeatureConfig",
    "FeatureError",
    "FeatureMatrix",
    "FormulaError",
    "build_matrix",
    "default_table",
    "elemental_stats",
    "parse_formula",
    "phase1_features",
    "phase2_features",
    "phase3_descriptors",
]
