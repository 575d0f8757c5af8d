"""Physical validity filters and the curation funnel."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

from gapaudit.ingest import TARGET, RawRecord

CORE_FIELDS = (
    "formation_energy_per_atom",
    "density",
    "nat",
    "dimensionality",
    "spg_number",
    "bulk_modulus_kv",
    "shear_modulus_gv",
    "poisson",
    "epsx",
    "epsy",
    "epsz",
    "ehull",
    TARGET,
)
TEXT_FIELDS = frozenset({"dimensionality"})


class EfgDataError(ValueError):
    pass


@dataclass
class FilterConfig:
    poisson_min: float = 0.1
    poisson_max: float = 0.5
    bulk_max_gpa: float = 300.0
    shear_max_gpa: float = 200.0
    eps_cap: float = 100.0
    required_fields: tuple[str, ...] = CORE_FIELDS
    allowed_dimensionalities: tuple[str, ...] = ("2D", "3D")

    def __post_init__(self):
        self.required_fields = tuple(self.required_fields)
        self.allowed_dimensionalities = tuple(self.allowed_dimensionalities)
        if not self.poisson_min < self.poisson_max:
            raise ValueError("poisson_min must be below poisson_max")
        if min(self.bulk_max_gpa, self.shear_max_gpa, self.eps_cap) <= 0:
            raise ValueError("caps must be positive")

    def to_json(self) -> dict:
        d = asdict(self)
        d["required_fields"] = list(self.required_fields)
        d["allowed_dimensionalities"] = list(self.allowed_dimensionalities)
        return d


@dataclass
class CuratedRecord(RawRecord):
    is_3D: bool = False
    max_efg: float = 0.0

    def to_json(self) -> dict:
        out = super().to_json()
        out["is_3D"] = self.is_3D
        out["max_efg"] = self.max_efg
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "CuratedRecord":
        obj = dict(obj)
        rid, formula = obj.pop("id"), obj.pop("formula")
        is_3d = bool(obj.pop("is_3D"))
        efg = float(obj["max_efg"])
        return cls(id=str(rid), formula=formula, values=obj, is_3D=is_3d, max_efg=efg)


@dataclass
class FunnelStage:
    stage: str
    records_in: int
    records_out: int
    reason: str

    def to_json(self) -> dict:
        return {"stage": self.stage, "in": self.records_in, "out": self.records_out, "reason": self.reason}


@dataclass
class CurationFunnel:
    stages: list[FunnelStage] = field(default_factory=list)

    @property
    def final_count(self) -> int:
        return self.stages[-1].records_out if self.stages else 0

    def to_json(self) -> list[dict]:
        return [s.to_json() for s in self.stages]


def _dimensionality(record: RawRecord) -> str | None:
    v = record.values.get("dimensionality")
    return v.strip().casefold() if isinstance(v, str) else None


def derive_is_3D(record: RawRecord) -> bool:
    dim = _dimensionality(record)
    if dim not in ("2d", "3d"):
        raise ValueError(f"record {record.id}: dimensionality {record.values.get('dimensionality')!r} is not 2D/3D")
    return dim == "3d"


def reconstruct_max_efg(record: RawRecord) -> float | None:
    """Native ``max_efg`` if present, else the largest |component| of the per-site EFG tensors."""
    native = record.number("max_efg")
    if native is not None:
        return native
    tensor = record.values.get("efg_tensor")
    if tensor is None:
        return None
    best = None
    try:
        stack = [tensor]
        while stack:
            item = stack.pop()
            if isinstance(item, (list, tuple)):
                stack.extend(item)
                continue
            if isinstance(item, bool) or not isinstance(item, (int, float)) or not math.isfinite(item):
                raise TypeError(item)
            best = abs(float(item)) if best is None else max(best, abs(float(item)))
    except TypeError as exc:
        raise EfgDataError(f"record {record.id}: non-numeric EFG tensor entry {exc.args[0]!r}") from None
    return best


def _complete(rec: RawRecord, cfg: FilterConfig) -> bool:
    for name in cfg.required_fields:
        if name in TEXT_FIELDS:
            if not isinstance(rec.values.get(name), str):
                return False
        elif rec.number(name) is None:
            return False
    # the target is always required, whatever the config says
    gap = rec.number(TARGET)
    return gap is not None and gap >= 0


def _in_range(rec: RawRecord, name: str, lo: float, hi: float, lo_open: bool = False) -> bool:
    v = rec.number(name)
    if v is None:
        return False
    return (lo < v if lo_open else lo <= v) and v <= hi


def _spg_valid(rec: RawRecord) -> bool:
    v = rec.number("spg_number")
    return v is not None and v.is_integer() and 1 <= v <= 230


def _dim_allowed(rec: RawRecord, cfg: FilterConfig) -> bool:
    return _dimensionality(rec) in {d.strip().casefold() for d in cfg.allowed_dimensionalities}


def _efg_available(rec: RawRecord) -> bool:
    try:
        return reconstruct_max_efg(rec) is not None
    except EfgDataError:
        return False


Predicate = Callable[[RawRecord, FilterConfig], bool]

STAGES: list[tuple[str, str, Predicate]] = [
    ("completeness", "missing required descriptor or negative bandgap", _complete),
    ("formation_energy", "positive formation energy", lambda r, c: _in_range(r, "formation_energy_per_atom", -math.inf, 0.0)),
    ("poisson", "Poisson ratio outside working window", lambda r, c: _in_range(r, "poisson", c.poisson_min, c.poisson_max)),
    (
        "moduli",
        "non-positive or excessive bulk/shear modulus",
        lambda r, c: _in_range(r, "bulk_modulus_kv", 0.0, c.bulk_max_gpa, lo_open=True)
        and _in_range(r, "shear_modulus_gv", 0.0, c.shear_max_gpa, lo_open=True),
    ),
    (
        "dielectric",
        "dielectric component outside (0, eps_cap]",
        lambda r, c: all(_in_range(r, k, 0.0, c.eps_cap, lo_open=True) for k in ("epsx", "epsy", "epsz")),
    ),
    ("space_group", "invalid space-group index", lambda r, c: _spg_valid(r)),
    ("dimensionality", "dimensionality not in allowed set", _dim_allowed),
    ("max_efg", "max_efg unavailable and not reconstructible", lambda r, c: _efg_available(r)),
]


def violations(record: RawRecord, cfg: FilterConfig) -> list[str]:
    """Names of every stage predicate ``record`` fails."""
    return [name for name, _, pred in STAGES if not pred(record, cfg)]


def apply_filters(
    records: list[RawRecord], cfg: FilterConfig | None = None, stage_order: list[str] | None = None
) -> tuple[list[CuratedRecord], CurationFunnel]:
    """Run the validity stages in order, recording per-stage counts.

    ``stage_order`` permutes the stages (the survivor set is order-independent,
    the funnel counts are not). Input order is preserved.
    """
    cfg = cfg or FilterConfig()
    stages = STAGES
    if stage_order is not None:
        by_name = {s[0]: s for s in STAGES}
        stages = [by_name[name] for name in stage_order]
        if len(stages) != len(STAGES):
            raise ValueError("stage_order must name every stage once")
    current = list(records)
    funnel = CurationFunnel()
    for name, reason, pred in stages:
        kept = [r for r in current if pred(r, cfg)]
        funnel.stages.append(FunnelStage(name, len(current), len(kept), reason))
        current = kept
    curated = []
    for r in current:
        efg = reconstruct_max_efg(r)
        values = {**r.values, "max_efg": efg}
        curated.append(CuratedRecord(id=r.id, formula=r.formula, values=values, is_3D=derive_is_3D(r), max_efg=efg))
    return curated, funnel
