from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from gapaudit.ingest import TARGET


@dataclass
class FeatureMatrix:
    """Named numeric design matrix with its target; the unit passed between stages."""

    column_names: list[str]
    rows: np.ndarray
    target: np.ndarray
    phase: str
    row_ids: list[str]

    def __post_init__(self):
        self.column_names = list(self.column_names)
        self.row_ids = [str(r) for r in self.row_ids]
        self.rows = np.asarray(self.rows, dtype=float).reshape(len(self.row_ids), len(self.column_names))
        self.target = np.asarray(self.target, dtype=float).ravel()
        if len(set(self.column_names)) != len(self.column_names):
            raise ValueError("column names must be unique")
        if self.target.shape[0] != self.rows.shape[0]:
            raise ValueError("target length must equal the number of rows")
        if not (np.isfinite(self.rows).all() and np.isfinite(self.target).all()):
            raise ValueError("feature matrix has missing or non-finite entries")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.column_names.index(name)]

    def select(self, names) -> "FeatureMatrix":
        idx = [self.column_names.index(n) for n in names]
        return FeatureMatrix(list(names), self.rows[:, idx], self.target, self.phase, self.row_ids)

    def drop(self, names) -> "FeatureMatrix":
        names = set(names)
        return self.select([c for c in self.column_names if c not in names])

    def with_column(self, name: str, values) -> "FeatureMatrix":
        values = np.asarray(values, dtype=float).reshape(-1, 1)
        if values.shape[0] != self.n:
            raise ValueError(f"column {name!r} has {values.shape[0]} rows, matrix has {self.n}")
        return FeatureMatrix(self.column_names + [name], np.hstack([self.rows, values]), self.target, self.phase, self.row_ids)

    def take(self, indices) -> "FeatureMatrix":
        indices = np.asarray(indices, dtype=int)
        return FeatureMatrix(self.column_names, self.rows[indices], self.target[indices], self.phase, [self.row_ids[i] for i in indices])

    def metadata(self) -> dict:
        return {"phase": self.phase, "n": self.n, "p": self.p, "column_names": self.column_names, "target": TARGET}

    def to_csv(self, path) -> None:
        """Write ``id, <features...>, target`` rows plus a ``.json`` metadata sidecar."""
        with open(path, "w", newline="") as fp:
            w = csv.writer(fp, lineterminator="\n")
            w.writerow(["id"] + self.column_names + [TARGET])
            for rid, row, y in zip(self.row_ids, self.rows, self.target):
                w.writerow([rid] + [repr(float(v)) for v in row] + [repr(float(y))])
        with open(str(path) + ".json", "w") as fp:
            json.dump(self.metadata(), fp, indent=2)
            fp.write("\n")

    @classmethod
    def from_csv(cls, path, phase: str | None = None) -> "FeatureMatrix":
        with open(path, newline="") as fp:
            reader = csv.reader(fp)
            header = next(reader)
            data = [row for row in reader if row]
        try:
            with open(str(path) + ".json") as fp:
                phase = phase or json.load(fp).get("phase")
        except FileNotFoundError:
            pass
        ids = [row[0] for row in data]
        values = np.array([[float(v) for v in row[1:]] for row in data], dtype=float).reshape(len(data), len(header) - 1)
        return cls(header[1:-1], values[:, :-1], values[:, -1], phase or "?", ids)
