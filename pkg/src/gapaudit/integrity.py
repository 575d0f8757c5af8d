"""Raw-versus-curated dataset diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from gapaudit.ingest import TARGET, RawRecord

DEFAULT_THRESHOLDS = (0.8, 0.9, 0.95, 0.99)
PCA_DESCRIPTORS = (
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
)
RANGE_PROPERTIES = (TARGET, "density", "formation_energy_per_atom")


@dataclass
class KsResult:
    d_statistic: float
    p_value: float
    n1: int
    n2: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class PcaResult:
    explained_variance_ratios: list[float]
    components_for_thresholds: dict[float, int]
    columns: list[str] = field(default_factory=list)
    n_rows: int = 0

    def to_json(self) -> dict:
        return {
            "ratios": self.explained_variance_ratios,
            "thresholds": {f"{t:g}": k for t, k in self.components_for_thresholds.items()},
            "columns": self.columns,
            "n_rows": self.n_rows,
        }


@dataclass
class RangeEntry:
    name: str
    raw_min: float
    raw_max: float
    curated_min: float
    curated_max: float
    preserved_fraction: float

    def to_json(self) -> dict:
        return asdict(self)


def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """Survival function of the Kolmogorov distribution, clamped to [0, 1].

    Uses the alternating series ``2 sum (-1)^(k-1) exp(-2 k^2 lam^2)`` for
    ``lam >= 0.3``; below that the series converges too slowly and the
    equivalent theta-function form of the CDF is used instead.
    """
    if lam <= 0:
        return 1.0
    if lam < 0.3:
        s, k = 0.0, 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * lam * lam))
            s += term
            if term < tol:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * s))
    s, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        s += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_two_sample(x, y) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    a = np.sort(np.asarray(x, dtype=float))
    b = np.sort(np.asarray(y, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("samples must be finite")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    ne = a.size * b.size / (a.size + b.size)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    return KsResult(d_statistic=d, p_value=kolmogorov_sf(lam), n1=int(a.size), n2=int(b.size))


def jacobi_eigenvalues(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * trace`` (absolute ``tol`` when the trace is zero).
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 1:
        return a.diagonal().copy()
    scale = abs(np.trace(a)) or 1.0
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        # summing the off-diagonal squares directly; total minus diagonal cancels badly
        off = math.sqrt(float(np.sum(a[offdiag] ** 2)))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J on rows/cols p, q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.diag(a).copy()


def pca_explained_variance(matrix, standardize: bool = True, thresholds=DEFAULT_THRESHOLDS, columns=None) -> PcaResult:
    """Explained-variance ratios of the covariance spectrum.

    ``matrix`` is an ``n x p`` array or a :class:`FeatureMatrix`.
    """
    if hasattr(matrix, "rows"):
        columns = list(matrix.column_names) if columns is None else columns
        matrix = matrix.rows
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 1:
        raise ValueError("need an n x p matrix with n >= 2, p >= 1")
    if not np.isfinite(x).all():
        raise ValueError("matrix has missing or non-finite entries")
    z = x - x.mean(axis=0)
    if standardize:
        sd = z.std(axis=0, ddof=1)
        nz = sd > 0
        z[:, nz] = z[:, nz] / sd[nz]
    cov = z.T @ z / (x.shape[0] - 1)
    total = float(np.trace(cov))
    if total <= 0:
        raise ValueError("degenerate matrix: zero total variance")
    eig = np.clip(jacobi_eigenvalues(cov), 0.0, None)
    ratios = np.sort(eig)[::-1] / eig.sum()
    cumulative = np.cumsum(ratios)
    counts = {}
    for t in thresholds:
        counts[float(t)] = int(np.searchsorted(cumulative, t - 1e-12) + 1)
    return PcaResult(
        explained_variance_ratios=[float(r) for r in ratios],
        components_for_thresholds=counts,
        columns=list(columns) if columns is not None else [],
        n_rows=int(x.shape[0]),
    )


def range_preservation(raw_col, curated_col, name: str = "") -> RangeEntry:
    """Share of the raw value range still spanned after curation."""
    raw = np.asarray(raw_col, dtype=float)
    cur = np.asarray(curated_col, dtype=float)
    if raw.size == 0 or cur.size == 0:
        raise ValueError("columns must be non-empty")
    if not (np.isfinite(raw).all() and np.isfinite(cur).all()):
        raise ValueError("columns must be finite")
    lo, hi = float(raw.min()), float(raw.max())
    if hi == lo:
        raise ValueError("zero raw range")
    clo, chi = float(cur.min()), float(cur.max())
    return RangeEntry(name, lo, hi, clo, chi, (chi - clo) / (hi - lo))


def _column(records: list[RawRecord], name: str) -> list[float]:
    out = []
    for r in records:
        v = r.number(name)
        if v is not None:
            out.append(v)
    return out


def _pca_row(rec: RawRecord, names) -> list[float] | None:
    row = []
    for name in names:
        if name == "dimensionality":
            dim = rec.values.get("dimensionality")
            if not isinstance(dim, str):
                return None
            row.append(1.0 if dim.strip().casefold() == "3d" else 0.0)
        else:
            v = rec.number(name)
            if v is None:
                return None
            row.append(v)
    return row


def integrity_report(raw: list[RawRecord], curated: list[RawRecord], pca_columns=PCA_DESCRIPTORS, standardize=True) -> dict:
    """K-S on the target, PCA on the complete raw subset, and range preservation."""
    ks = ks_two_sample(_column(raw, TARGET), _column(curated, TARGET))
    rows = [row for row in (_pca_row(r, pca_columns) for r in raw) if row is not None]
    pca = pca_explained_variance(np.array(rows), standardize=standardize, columns=list(pca_columns))
    ranges = [range_preservation(_column(raw, p), _column(curated, p), name=p) for p in RANGE_PROPERTIES]
    return {"ks": ks.to_json(), "pca": pca.to_json(), "ranges": [r.to_json() for r in ranges]}
