"""Pipeline configuration.

Precedence, lowest to highest: built-in defaults, the TOML/JSON config file,
command-line flags. Sections mirror the stage modules::

    inputs = ["dft_3d.jsonl", "dft_3d_2021.jsonl"]
    seed = 42
    models = ["ridge", "rf-conservative", {preset = "xgb-balanced", n_estimators = 100}]

    [filters]
    eps_cap = 100.0

    [select]
    correlation_cutoff = 0.95

    [audit]
    models = ["rf-conservative", "xgb-conservative"]
    min_delta_r2 = 0.05
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from gapaudit.audit import FlagThresholds, RiskRegistry, default_registry
from gapaudit.curate import FilterConfig
from gapaudit.features.descriptors import FeatureConfig
from gapaudit.learn.ensemble import GbtParams
from gapaudit.learn.presets import PRESETS, ModelSpec, resolve_model
from gapaudit.select import SelectConfig

DEFAULT_MODELS = tuple(PRESETS)
DEFAULT_AUDIT_MODELS = ("rf-conservative", "xgb-conservative")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    inputs: list[str] = field(default_factory=list)
    out_dir: str = "gapaudit-out"
    seed: int = 42
    train_fraction: float = 0.8
    filters: FilterConfig = field(default_factory=FilterConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    select: SelectConfig = field(default_factory=SelectConfig)
    models: list = field(default_factory=lambda: list(DEFAULT_MODELS))
    sweep_model: object = "xgb-conservative"
    audit_models: list = field(default_factory=lambda: list(DEFAULT_AUDIT_MODELS))
    thresholds: FlagThresholds = field(default_factory=FlagThresholds)
    registry: RiskRegistry = field(default_factory=default_registry)
    shap_max_rows: int | None = 100
    pca_standardize: bool = True
    reference_phase3_columns: int = 170

    def model_specs(self) -> list[ModelSpec]:
        return [resolve_model(m) for m in self.models]

    def audit_specs(self) -> list[ModelSpec]:
        return [resolve_model(m) for m in self.audit_models]

    def validate(self) -> None:
        if not self.inputs:
            raise ConfigError("no input files configured")
        if len(self.inputs) > 2:
            raise ConfigError("at most two input sources are supported")
        missing = [p for p in self.inputs if not Path(p).is_file()]
        if missing:
            raise ConfigError(f"input file(s) not found: {missing}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.shap_max_rows is not None and (not isinstance(self.shap_max_rows, int) or self.shap_max_rows < 1):
            raise ConfigError("shap_max_rows must be a positive integer or omitted")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        try:
            self.model_specs()
            self.audit_specs()
            resolve_model(self.sweep_model)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model entry: {exc}") from None
        names = [s.name for s in self.model_specs()]
        if len(set(names)) != len(names):
            raise ConfigError("model names must be unique")

    def to_json(self) -> dict:
        """Resolved settings; the output directory and input locations are left out so they do not affect hashes."""
        return {
            "inputs": [Path(p).name for p in self.inputs],
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "filters": self.filters.to_json(),
            "features": self.features.to_json(),
            "select": self.select.to_json(),
            "models": [s.to_json() for s in self.model_specs()],
            "sweep_model": resolve_model(self.sweep_model).to_json(),
            "audit_models": [s.to_json() for s in self.audit_specs()],
            "thresholds": self.thresholds.to_json(),
            "registry": self.registry.to_json(),
            "shap_max_rows": self.shap_max_rows,
            "pca_standardize": self.pca_standardize,
            "reference_phase3_columns": self.reference_phase3_columns,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _pick(section: dict, cls, extra_ok=()):
    known = set(cls.__dataclass_fields__)
    unknown = set(section) - known - set(extra_ok)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} key(s): {sorted(unknown)}")
    return {k: v for k, v in section.items() if k in known}


def config_from_dict(data: dict, base_dir: Path | None = None) -> PipelineConfig:
    data = dict(data)
    cfg = PipelineConfig()
    base_dir = base_dir or Path.cwd()

    def resolve_path(p):
        p = Path(p)
        return str(p if p.is_absolute() else base_dir / p)

    if "inputs" in data:
        cfg.inputs = [resolve_path(p) for p in data.pop("inputs")]
    if "out_dir" in data:
        cfg.out_dir = resolve_path(data.pop("out_dir"))
    for key in ("seed", "train_fraction", "models", "sweep_model", "shap_max_rows", "pca_standardize", "reference_phase3_columns"):
        if key in data:
            setattr(cfg, key, data.pop(key))
    if "filters" in data:
        cfg.filters = FilterConfig(**_pick(data.pop("filters"), FilterConfig))
    if "features" in data:
        cfg.features = FeatureConfig(**_pick(data.pop("features"), FeatureConfig))
    if "select" in data:
        sec = dict(data.pop("select"))
        ranking = sec.pop("ranking_model", None)
        cfg.select = SelectConfig(**_pick(sec, SelectConfig))
        if ranking is not None:
            cfg.select.ranking_model = GbtParams(**ranking)
    if "audit" in data:
        sec = dict(data.pop("audit"))
        if "models" in sec:
            cfg.audit_models = sec.pop("models")
        thr = {k: sec.pop(k) for k in ("min_delta_r2", "min_mae_reduction") if k in sec}
        cfg.thresholds = FlagThresholds(**thr)
        if "risk" in sec:
            reg = default_registry()
            reg.levels.update(sec.pop("risk"))
            cfg.registry = reg
        if sec:
            raise ConfigError(f"unknown audit key(s): {sorted(sec)}")
    if data:
        raise ConfigError(f"unknown config key(s): {sorted(data)}")
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_bytes()
    try:
        data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text.decode("utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data, base_dir=path.parent)
