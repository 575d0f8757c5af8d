"""Reading, normalizing, merging and deduplicating raw material records."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable

PLACEHOLDERS = frozenset({"na", "[]", "None", "nan"})

DESCRIPTORS = (
    "formation_energy_per_atom",
    "ehull",
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
    "max_efg",
    "efg_tensor",
    "avg_elec_mass",
    "avg_hole_mass",
    "optb88vdw_bandgap",
)
TARGET = "optb88vdw_bandgap"
ENERGY = "formation_energy_per_atom"


class RecordParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class MergeConflictError(ValueError):
    def __init__(self, conflicts: list[tuple[str, str, object, object]]):
        desc = "; ".join(f"id={i} field={f} ({a!r} vs {b!r})" for i, f, a, b in conflicts[:10])
        super().__init__(f"{len(conflicts)} conflicting value(s): {desc}")
        self.conflicts = conflicts


@dataclass
class RawRecord:
    id: str
    formula: str
    values: dict[str, object] = field(default_factory=dict)

    def get(self, name: str, default=None):
        v = self.values.get(name)
        return default if v is None else v

    def number(self, name: str) -> float | None:
        """Finite numeric value of ``name`` or None."""
        v = self.values.get(name)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return None
        return float(v) if math.isfinite(v) else None

    def to_json(self) -> dict:
        out = {"id": self.id, "formula": self.formula}
        for k in sorted(self.values):
            out[k] = self.values[k]
        return out


@dataclass
class SourceMergeReport:
    records_in_a: int = 0
    records_in_b: int = 0
    merged_total: int = 0
    shared_fields: list[str] = field(default_factory=list)
    dedup_groups: int = 0
    dedup_survivors: int = 0
    unparseable_formulas: int = 0
    dropped_missing_energy: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def _as_text(stream) -> IO[str]:
    if isinstance(stream, bytes):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8")


def _record_from_mapping(obj: dict, line: int) -> RawRecord:
    rid = obj.pop("id", None)
    if rid is None:
        rid = obj.pop("jid", None)
    if rid is None or str(rid).strip() == "":
        raise RecordParseError("record has no id", line)
    formula = obj.pop("formula", None)
    if not isinstance(formula, str) or not formula.strip():
        raise RecordParseError(f"record {rid} has no formula", line)
    return RawRecord(id=str(rid), formula=formula.strip(), values=obj)


def _csv_cell(text: str):
    if text == "":
        return None
    s = text.strip()
    try:
        return float(s)
    except ValueError:
        pass
    if s.startswith("[") and s != "[]":
        try:
            return json.loads(s)
        except json.JSONDecodeError:
            return text
    return text


def parse_records(stream, format: str = "jsonl") -> list[RawRecord]:
    """Parse one record per JSONL line or CSV row.

    ``stream`` may be bytes, str, or a binary/text file object. Unknown
    descriptor names are kept as-is. Raises :class:`RecordParseError` naming
    the offending line for malformed input or duplicate ids.
    """
    fp = _as_text(stream)
    records: list[RawRecord] = []
    seen: set[str] = set()

    def add(rec: RawRecord, lineno: int) -> None:
        if rec.id in seen:
            raise RecordParseError(f"duplicate id {rec.id!r}", lineno)
        seen.add(rec.id)
        records.append(rec)

    if format == "jsonl":
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordParseError(f"malformed JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict):
                raise RecordParseError("expected a JSON object", lineno)
            add(_record_from_mapping(obj, lineno), lineno)
    elif format == "csv":
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is None:
            return []
        for row in reader:
            lineno = reader.line_num
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise RecordParseError(f"expected {len(header)} cells, got {len(row)}", lineno)
            obj = {}
            for name, cell in zip(header, row):
                obj[name] = cell.strip() if name in ("id", "jid", "formula") else _csv_cell(cell)
            add(_record_from_mapping(obj, lineno), lineno)
    else:
        raise ValueError(f"unsupported format {format!r}")
    return records


def read_records(path) -> list[RawRecord]:
    path = str(path)
    fmt = "csv" if path.endswith(".csv") else "jsonl"
    with open(path, "rb") as fp:
        return parse_records(fp.read(), fmt)


def write_records(records: Iterable[RawRecord], fp: IO[str]) -> None:
    for rec in records:
        fp.write(json.dumps(rec.to_json(), allow_nan=False) + "\n")


def _is_missing(v) -> bool:
    if v is None:
        return True
    if isinstance(v, str):
        return v.strip() in PLACEHOLDERS
    if isinstance(v, bool):
        return False
    if isinstance(v, float):
        return not math.isfinite(v)
    if isinstance(v, list):
        return len(v) == 0
    return False


def normalize_missing(record: RawRecord) -> RawRecord:
    """Map placeholder text (``na``, ``[]``, ``None``, ``nan``) and non-finite numbers to None."""
    values = {k: (None if _is_missing(v) else v) for k, v in record.values.items()}
    return RawRecord(id=record.id, formula=record.formula, values=values)


def _numbers_conflict(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return False
    if not (isinstance(a, (int, float)) and isinstance(b, (int, float))):
        return False
    return not math.isclose(a, b, rel_tol=1e-6, abs_tol=1e-12)


def merge_sources(a: list[RawRecord], b: list[RawRecord]) -> tuple[list[RawRecord], SourceMergeReport]:
    """Union of two sources keyed by id; ``b`` fills gaps left in ``a``."""
    merged: dict[str, RawRecord] = {}
    for rec in a:
        merged[rec.id] = RawRecord(rec.id, rec.formula, dict(rec.values))
    conflicts = []
    for rec in b:
        cur = merged.get(rec.id)
        if cur is None:
            merged[rec.id] = RawRecord(rec.id, rec.formula, dict(rec.values))
            continue
        for name, value in rec.values.items():
            mine = cur.values.get(name)
            if mine is None:
                cur.values[name] = value
            elif value is not None and _numbers_conflict(mine, value):
                conflicts.append((rec.id, name, mine, value))
    if conflicts:
        raise MergeConflictError(conflicts)

    fields_a = {k for r in a for k in r.values}
    fields_b = {k for r in b for k in r.values}
    report = SourceMergeReport(
        records_in_a=len(a),
        records_in_b=len(b),
        merged_total=len(merged),
        shared_fields=sorted(fields_a & fields_b),
    )
    return list(merged.values()), report


def dedup_lowest_energy(
    records: list[RawRecord], report: SourceMergeReport | None = None
) -> tuple[list[RawRecord], SourceMergeReport]:
    """Keep the lowest formation-energy record per reduced composition.

    Ties go to the lexicographically smallest id. Inside a multi-member group,
    records without a formation energy are dropped; a lone record survives
    either way. Unparseable formulas are excluded and counted.
    """
    from gapaudit.features.formula import FormulaError, parse_formula

    if report is None:
        report = SourceMergeReport(records_in_a=len(records), merged_total=len(records))
    groups: dict[tuple, list[int]] = {}
    unparseable = 0
    for idx, rec in enumerate(records):
        try:
            key = parse_formula(rec.formula).reduced_key()
        except (FormulaError, ValueError):
            unparseable += 1
            continue
        groups.setdefault(key, []).append(idx)

    keep: set[int] = set()
    dropped_missing = 0
    for members in groups.values():
        if len(members) == 1:
            keep.add(members[0])
            continue
        scored = []
        for idx in members:
            e = records[idx].number(ENERGY)
            if e is None:
                dropped_missing += 1
            else:
                scored.append((e, records[idx].id, idx))
        if scored:
            keep.add(min(scored)[2])

    survivors = [rec for idx, rec in enumerate(records) if idx in keep]
    report.dedup_groups = len(groups)
    report.dedup_survivors = len(survivors)
    report.unparseable_formulas = unparseable
    report.dropped_missing_energy = dropped_missing
    return survivors, report
