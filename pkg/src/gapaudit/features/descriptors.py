"""Phase I/II/III descriptor construction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gapaudit.curate import CuratedRecord
from gapaudit.features.elements import PROPERTY_FIELDS, ElementTable, MissingPropertyError, default_table
from gapaudit.features.formula import Composition, FormulaError, parse_formula
from gapaudit.features.matrix import FeatureMatrix
from gapaudit.ingest import TARGET

PHASE1_COLUMNS = (
    "formation_energy_per_atom",
    "ehull",
    "bulk_modulus_kv",
    "shear_modulus_gv",
    "poisson",
    "epsx",
    "epsy",
    "epsz",
    "density",
    "nat",
    "is_3D",
    "max_efg",
)
PHASE2_COLUMNS = (
    "dielectric_mean",
    "dielectric_anisotropy",
    "pugh_ratio",
    "v_t_proxy",
    "v_l_proxy",
    "specific_stiffness",
    "stability_stiffness_ratio",
)
PHASE3_COLUMNS = (
    "bond_polarity_index",
    "atomic_size_homogeneity",
    "relative_electronegativity_range",
    "radius_mismatch",
    "atomic_size_uniformity",
    "radius_variance",
    "pauling_ionicity_proxy",
    "d_hybridization_tendency",
    "pd_orbital_interaction_index",
    "sp_promotion_index",
    "transition_metal_electron_index",
)
STAT_KINDS = ("mean", "min", "max", "range", "std")

GPA_TO_PA = 1e9
GCM3_TO_KGM3 = 1000.0


class FeatureError(ValueError):
    def __init__(self, message: str, record_ids: list[str] | None = None):
        super().__init__(message)
        self.record_ids = record_ids or []


@dataclass
class FeatureConfig:
    epsilon_stabilizer: float = 1e-12
    sp_promotion_clip_max: float = 10.0
    elemental_stat_kinds: tuple[str, ...] = STAT_KINDS
    elemental_properties: tuple[str, ...] = PROPERTY_FIELDS

    def __post_init__(self):
        self.elemental_stat_kinds = tuple(self.elemental_stat_kinds)
        self.elemental_properties = tuple(self.elemental_properties)
        if self.epsilon_stabilizer <= 0 or self.sp_promotion_clip_max <= 0:
            raise ValueError("epsilon_stabilizer and sp_promotion_clip_max must be positive")
        unknown = set(self.elemental_stat_kinds) - set(STAT_KINDS)
        if unknown:
            raise ValueError(f"unknown statistic kinds {sorted(unknown)}")
        unknown = set(self.elemental_properties) - set(PROPERTY_FIELDS)
        if unknown:
            raise ValueError(f"unknown element properties {sorted(unknown)}")

    def to_json(self) -> dict:
        return {
            "epsilon_stabilizer": self.epsilon_stabilizer,
            "sp_promotion_clip_max": self.sp_promotion_clip_max,
            "elemental_stat_kinds": list(self.elemental_stat_kinds),
            "elemental_properties": list(self.elemental_properties),
        }


def phase1_features(record: CuratedRecord) -> dict[str, float]:
    out = {}
    for name in PHASE1_COLUMNS:
        if name == "is_3D":
            out[name] = 1.0 if record.is_3D else 0.0
        elif name == "max_efg":
            out[name] = float(record.max_efg)
        else:
            v = record.number(name)
            if v is None:
                raise FeatureError(f"record {record.id} lacks {name}", [record.id])
            out[name] = v
    return out


def phase2_features(record: CuratedRecord, cfg: FeatureConfig | None = None) -> dict[str, float]:
    cfg = cfg or FeatureConfig()
    eps = cfg.epsilon_stabilizer
    base = phase1_features(record)
    diel = (base["epsx"], base["epsy"], base["epsz"])
    diel_mean = sum(diel) / 3.0
    kv, gv = base["bulk_modulus_kv"], base["shear_modulus_gv"]
    k_pa, g_pa = kv * GPA_TO_PA, gv * GPA_TO_PA
    rho = base["density"] * GCM3_TO_KGM3
    return {
        "dielectric_mean": diel_mean,
        "dielectric_anisotropy": (max(diel) - min(diel)) / (diel_mean + eps),
        "pugh_ratio": gv / kv,
        "v_t_proxy": math.sqrt(g_pa / rho),
        "v_l_proxy": math.sqrt((k_pa + 4.0 * g_pa / 3.0) / rho),
        "specific_stiffness": k_pa / rho,
        "stability_stiffness_ratio": base["ehull"] / (kv + eps),
    }


def elemental_stats(comp: Composition, prop: str, kinds=STAT_KINDS, table: ElementTable | None = None) -> dict[str, float]:
    """Composition statistics of one elemental property.

    Mean and std are weighted by atomic fraction; min, max and range run
    over the distinct elements present.
    """
    table = table or default_table()
    weights = comp.weights
    vals = np.array([table.value(el, prop) for el in weights])
    w = np.array(list(weights.values()))
    mean = float(w @ vals)
    stats = {
        "mean": mean,
        "min": float(vals.min()),
        "max": float(vals.max()),
        "range": float(vals.max() - vals.min()),
        "std": math.sqrt(max(0.0, float(w @ (vals - mean) ** 2))),
    }
    return {f"{prop}_{k}": stats[k] for k in kinds}


def phase3_descriptors(comp: Composition, table: ElementTable | None = None, cfg: FeatureConfig | None = None) -> dict[str, float]:
    table = table or default_table()
    cfg = cfg or FeatureConfig()
    eps = cfg.epsilon_stabilizer
    chi = elemental_stats(comp, "chi", ("mean", "min", "max"), table)
    rad = elemental_stats(comp, "radius_pm", ("mean", "min", "max", "std"), table)
    weights = comp.weights
    fracs = {}
    for el in weights:
        for prop in ("ns", "np", "nd", "nf"):
            table.value(el, prop)
        fracs[el] = table[el].valence_fractions
    f_s, f_p, f_d, _ = (sum(weights[el] * fracs[el][i] for el in weights) for i in range(4))

    d_chi = chi["chi_max"] - chi["chi_min"]
    mismatch = (rad["radius_pm_max"] - rad["radius_pm_min"]) / rad["radius_pm_mean"]
    return {
        "bond_polarity_index": d_chi**2,
        "atomic_size_homogeneity": 1.0 / (1.0 + mismatch),
        "relative_electronegativity_range": d_chi / chi["chi_mean"],
        "radius_mismatch": mismatch,
        "atomic_size_uniformity": rad["radius_pm_mean"] / rad["radius_pm_max"],
        "radius_variance": rad["radius_pm_std"] ** 2,
        "pauling_ionicity_proxy": 1.0 - math.exp(-0.25 * d_chi**2),
        "d_hybridization_tendency": f_d,
        "pd_orbital_interaction_index": f_p * f_d,
        "sp_promotion_index": min(f_s / (f_p + eps), cfg.sp_promotion_clip_max),
        "transition_metal_electron_index": float(np.mean([fracs[el][2] for el in weights])),
    }


def phase3_columns(cfg: FeatureConfig) -> list[str]:
    stats = [f"{p}_{k}" for p in cfg.elemental_properties for k in cfg.elemental_stat_kinds]
    return list(PHASE1_COLUMNS) + list(PHASE3_COLUMNS) + stats


def _phase3_row(rec: CuratedRecord, table: ElementTable, cfg: FeatureConfig) -> dict[str, float]:
    comp = parse_formula(rec.formula)
    row = phase1_features(rec)
    row.update(phase3_descriptors(comp, table, cfg))
    for prop in cfg.elemental_properties:
        row.update(elemental_stats(comp, prop, cfg.elemental_stat_kinds, table))
    return row


def build_matrix(records: list[CuratedRecord], phase: str, cfg: FeatureConfig | None = None, table: ElementTable | None = None) -> FeatureMatrix:
    """Feature matrix for phase ``I`` (12 cols), ``II`` (19) or ``III`` (config-dependent)."""
    cfg = cfg or FeatureConfig()
    phase = str(phase).upper()
    if phase == "I":
        columns = list(PHASE1_COLUMNS)
        rows = [phase1_features(r) for r in records]
    elif phase == "II":
        columns = list(PHASE1_COLUMNS) + list(PHASE2_COLUMNS)
        rows = [{**phase1_features(r), **phase2_features(r, cfg)} for r in records]
    elif phase == "III":
        table = table or default_table()
        columns = phase3_columns(cfg)
        rows, bad = [], []
        for r in records:
            try:
                rows.append(_phase3_row(r, table, cfg))
            except (FormulaError, MissingPropertyError) as exc:
                bad.append((r.id, str(exc)))
        if bad:
            ids = [b[0] for b in bad]
            raise FeatureError(f"{len(bad)} record(s) not covered by the element table, e.g. {bad[0][0]}: {bad[0][1]}", ids)
    else:
        raise ValueError(f"unknown phase {phase!r}")
    values = np.array([[row[c] for c in columns] for row in rows], dtype=float).reshape(len(rows), len(columns))
    target = np.array([r.number(TARGET) for r in records], dtype=float)
    return FeatureMatrix(columns, values, target, phase, [r.id for r in records])
