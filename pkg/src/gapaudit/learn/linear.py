"""Standardization and closed-form ridge regression."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


@dataclass(frozen=True)
class RidgeParams:
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")

    def to_json(self) -> dict:
        return asdict(self)


class Standardizer:
    """Column z-scoring with statistics taken from the rows it was fitted on."""

    def __init__(self, mean, std, n_rows: int):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)
        self.n_rows = int(n_rows)

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        std = X.std(axis=0)
        # constant columns map to zero instead of dividing by zero
        std = np.where(std > 0, std, 1.0)
        return cls(X.mean(axis=0), std, X.shape[0])

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


class RidgeModel:
    def __init__(self, weights, intercept: float, scaler: Standardizer, params: RidgeParams):
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.scaler = scaler
        self.params = params

    def predict(self, X) -> np.ndarray:
        return self.scaler.transform(X) @ self.weights + self.intercept

    def to_json(self) -> dict:
        return {
            "kind": "ridge",
            "params": self.params.to_json(),
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "scaler": {"mean": self.scaler.mean.tolist(), "std": self.scaler.std.tolist(), "n_rows": self.scaler.n_rows},
        }


def fit_ridge(X_train, y_train, params: RidgeParams | None = None) -> RidgeModel:
    """Solve ``(Z'Z + alpha I) w = Z'(y - mean y)`` on training-standardized ``Z`` by Cholesky."""
    params = params or RidgeParams()
    X = np.asarray(X_train, dtype=float)
    y = np.asarray(y_train, dtype=float)
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("ridge inputs must be finite")
    scaler = Standardizer.fit(X)
    Z = scaler.transform(X)
    ybar = float(y.mean())
    A = Z.T @ Z + params.alpha * np.eye(Z.shape[1])
    b = Z.T @ (y - ybar)
    w = cho_solve(cho_factor(A, lower=True), b)
    return RidgeModel(w, ybar, scaler, params)
