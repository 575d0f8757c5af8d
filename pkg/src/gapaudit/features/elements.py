"""Embedded elemental property table."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

PROPERTY_FIELDS = ("chi", "radius_pm", "ns", "np", "nd", "nf")


@dataclass(frozen=True)
class ElementProps:
    symbol: str
    chi: float  # Pauling electronegativity, nan when undefined
    radius_pm: float  # covalent radius
    ns: float
    np: float
    nd: float
    nf: float

    def get(self, prop: str) -> float:
        if prop not in PROPERTY_FIELDS:
            raise KeyError(f"unknown element property {prop!r}")
        return getattr(self, prop)

    @property
    def valence_fractions(self) -> tuple[float, float, float, float]:
        """(f_s, f_p, f_d, f_f): share of each orbital in the valence count."""
        total = self.ns + self.np + self.nd + self.nf
        if total <= 0:
            return (0.0, 0.0, 0.0, 0.0)
        return (self.ns / total, self.np / total, self.nd / total, self.nf / total)


class ElementTable:
    """Symbol-indexed registry of :class:`ElementProps`."""

    def __init__(self, rows: dict[str, ElementProps], version: str = "custom"):
        self._rows = dict(rows)
        self.version = version

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._rows

    def __getitem__(self, symbol: str) -> ElementProps:
        return self._rows[symbol]

    def __len__(self) -> int:
        return len(self._rows)

    def symbols(self) -> list[str]:
        return list(self._rows)

    def value(self, symbol: str, prop: str) -> float:
        """Property value, raising when the element or value is missing."""
        if symbol not in self._rows:
            raise MissingPropertyError(symbol, prop)
        v = self._rows[symbol].get(prop)
        if not math.isfinite(v):
            raise MissingPropertyError(symbol, prop)
        return v

    @classmethod
    def from_csv(cls, text: str, version: str = "custom") -> "ElementTable":
        lines = []
        for line in io.StringIO(text):
            if line.startswith("#"):
                if "version" in line and version == "custom":
                    version = line.split("version", 1)[1].strip(" .\n")
                continue
            lines.append(line)
        rows = {}
        for rec in csv.DictReader(lines):
            vals = {k: float(rec[k]) if rec[k].strip() else math.nan for k in PROPERTY_FIELDS}
            rows[rec["symbol"]] = ElementProps(symbol=rec["symbol"], **vals)
        return cls(rows, version=version)


class MissingPropertyError(KeyError):
    def __init__(self, symbol: str, prop: str):
        super().__init__(f"element {symbol} has no value for {prop}")
        self.symbol = symbol
        self.prop = prop

    def __str__(self):
        return self.args[0]


@lru_cache(maxsize=None)
def default_table() -> ElementTable:
    """The packaged table (Z = 1..94)."""
    text = resources.files("gapaudit").joinpath("data/elements.csv").read_text(encoding="utf-8")
    return ElementTable.from_csv(text)
