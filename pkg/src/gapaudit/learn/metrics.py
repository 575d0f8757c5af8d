from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class Metrics:
    r2: float | None
    mae: float
    mse: float
    residual_mean: float
    residual_std: float
    n: int = 0
    error: str | None = None

    def to_json(self) -> dict:
        return asdict(self)


def metrics_from_predictions(y_true, y_pred) -> Metrics:
    y = np.asarray(y_true, dtype=float)
    yhat = np.asarray(y_pred, dtype=float)
    resid = yhat - y
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2, err = (1.0 - ss_res / ss_tot, None) if ss_tot > 0 else (None, "zero test-target variance: r2 undefined")
    return Metrics(
        r2=r2,
        mae=float(np.mean(np.abs(resid))),
        mse=float(np.mean(resid**2)),
        residual_mean=float(resid.mean()),
        residual_std=float(resid.std()),
        n=int(y.size),
        error=err,
    )


def evaluate(model, X_test, y_test) -> Metrics:
    return metrics_from_predictions(y_test, model.predict(X_test))
