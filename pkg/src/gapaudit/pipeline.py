"""End-to-end orchestration and report emission."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gapaudit import audit as audit_mod
from gapaudit.config import PipelineConfig
from gapaudit.curate import CuratedRecord, apply_filters
from gapaudit.explain import explain_rows, global_importance
from gapaudit.features.descriptors import build_matrix
from gapaudit.features.matrix import FeatureMatrix
from gapaudit.ingest import RawRecord, dedup_lowest_energy, merge_sources, normalize_missing, read_records, write_records
from gapaudit.integrity import integrity_report
from gapaudit.learn.linear import RidgeModel
from gapaudit.learn.metrics import Metrics, evaluate
from gapaudit.learn.presets import ModelSpec
from gapaudit.learn.split import SplitSpec, make_split
from gapaudit.select import correlation_filter, importance_ranking, subset_sweep, variance_filter

log = logging.getLogger(__name__)

PHASES = ("I", "II", "III")
RESIDUAL_BIN_WIDTH = 0.1
HIGH_RISK_FIELDS = ("avg_elec_mass", "avg_hole_mass")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def dump_json(obj, path: Path) -> None:
    with open(path, "w") as fp:
        json.dump(obj, fp, indent=2, allow_nan=False, default=_json_default)
        fp.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(obj):
    """Replace non-finite floats with None so reports stay strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


# -- stages ---------------------------------------------------------------


def ingest_stage(paths: list[str]) -> tuple[list[RawRecord], dict]:
    sources = [[normalize_missing(r) for r in read_records(p)] for p in paths]
    if len(sources) == 2:
        merged, report = merge_sources(sources[0], sources[1])
    else:
        merged, report = merge_sources(sources[0], [])
    unique, report = dedup_lowest_energy(merged, report)
    return unique, report.to_json()


def split_for(n: int, cfg: PipelineConfig) -> SplitSpec:
    return make_split(n, SplitSpec(train_fraction=cfg.train_fraction, seed=cfg.seed))


def residual_summary(residuals, bin_width: float = RESIDUAL_BIN_WIDTH) -> dict:
    """Mean, std and a fixed-width histogram whose edges span exactly [min, max]."""
    r = np.asarray(residuals, dtype=float)
    lo, hi = float(r.min()), float(r.max())
    k = max(1, int(math.ceil((hi - lo) / bin_width - 1e-9)))
    edges = [lo + i * bin_width for i in range(k)] + [hi]
    counts = np.histogram(r, bins=edges)[0] if hi > lo else np.array([r.size])
    return {
        "mean": float(r.mean()),
        "std": float(r.std()),
        "bin_width": bin_width,
        "bin_edges": edges,
        "counts": [int(c) for c in counts],
    }


def emit_parity_and_residuals(model, X_test, y_test, ids, csv_path: Path | None = None) -> dict:
    """Write ``id, y_true, y_pred`` rows and return the residual summary (residual = pred - true)."""
    pred = model.predict(X_test)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fp:
            w = csv.writer(fp, lineterminator="\n")
            w.writerow(["id", "y_true", "y_pred"])
            for rid, yt, yp in zip(ids, y_test, pred):
                w.writerow([rid, repr(float(yt)), repr(float(yp))])
    return residual_summary(pred - np.asarray(y_test, dtype=float))


@dataclass
class PhaseRun:
    phase: str
    matrix: FeatureMatrix
    results: dict[str, Metrics]
    models: dict[str, object]


def train_phase(m: FeatureMatrix, specs: list[ModelSpec], split: SplitSpec) -> PhaseRun:
    tr, te = split.train_indices, split.test_indices
    results, models = {}, {}
    for spec in specs:
        log.info("phase %s: fitting %s", m.phase, spec.name)
        model = spec.fit(m.rows[tr], m.target[tr])
        if isinstance(model, RidgeModel) and model.scaler.n_rows != len(tr):
            raise RuntimeError("standardizer was not fitted on exactly the training rows")
        results[spec.name] = evaluate(model, m.rows[te], m.target[te])
        models[spec.name] = model
    return PhaseRun(m.phase, m, results, models)


def phase_comparison(runs: list[PhaseRun], specs: list[ModelSpec]) -> list[dict]:
    """One row per (model, phase); exactly one best configuration per family and phase by R2."""
    rows = []
    for run in runs:
        families: dict[str, list[ModelSpec]] = {}
        for s in specs:
            families.setdefault(s.family, []).append(s)
        for family, members in families.items():
            best = max(members, key=lambda s: (_r2(run.results[s.name]), -members.index(s)))
            for s in members:
                met = run.results[s.name]
                rows.append(
                    {
                        "family": family,
                        "model": s.name,
                        "phase": run.phase,
                        "n_features": run.matrix.p,
                        "r2": met.r2,
                        "mae": met.mae,
                        "mse": met.mse,
                        "best": s is best,
                    }
                )
    return rows


def metrics_payload(runs: list[PhaseRun], comparison: list[dict]) -> dict:
    return {"phases": {r.phase: {name: m.to_json() for name, m in r.results.items()} for r in runs}, "comparison": comparison}


def write_comparison_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fp:
        w = csv.DictWriter(fp, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def parity_reports(runs: list[PhaseRun], comparison: list[dict], split: SplitSpec, out_dir: Path) -> dict:
    """Parity CSV plus residual summary for every best configuration, keyed by phase then model."""
    te = split.test_indices
    out: dict[str, dict] = {}
    for r in runs:
        test_ids = [r.matrix.row_ids[i] for i in te]
        for row in comparison:
            if row["phase"] != r.phase or not row["best"]:
                continue
            name = f"parity_phase{r.phase}_{row['model']}.csv"
            summary = emit_parity_and_residuals(r.models[row["model"]], r.matrix.rows[te], r.matrix.target[te], test_ids, Path(out_dir) / name)
            out.setdefault(r.phase, {})[row["model"]] = {"parity_file": name, **summary}
    return out


def _r2(m: Metrics) -> float:
    return m.r2 if m.r2 is not None else -math.inf


def selection_stage(m3: FeatureMatrix, cfg: PipelineConfig, split: SplitSpec) -> tuple[FeatureMatrix, dict]:
    sc = cfg.select
    after_var, var_dropped = variance_filter(m3, sc.variance_threshold)
    after_corr, corr_pairs = correlation_filter(after_var, sc.correlation_cutoff)
    # ranking sees training rows only, so the held-out rows never steer selection
    ranking = importance_ranking(after_corr.take(split.train_indices), sc)
    sweep = subset_sweep(after_corr, ranking, sc, split, cfg.sweep_model)
    top = [name for name, _ in ranking[: sweep.best_size]]
    selected = after_corr.select(top)
    report = {
        "columns_before_selection": m3.p,
        "reference_columns_before_selection": cfg.reference_phase3_columns,
        "column_count_matches_reference": m3.p == cfg.reference_phase3_columns,
        "variance_dropped": var_dropped,
        "correlation_dropped": [{"kept": k, "dropped": d} for k, d in corr_pairs],
        "columns_after_filters": after_corr.p,
        "ranking": [{"feature": f, "gain": g} for f, g in ranking],
        **sweep.to_json(),
        "selected_columns": top,
    }
    return selected, report


def shap_stage(run: PhaseRun, specs: list[ModelSpec], split: SplitSpec, comparison: list[dict], max_rows: int | None) -> dict:
    te = split.test_indices if max_rows is None else split.test_indices[:max_rows]
    X = run.matrix.rows[te]
    ids = [run.matrix.row_ids[i] for i in te]
    best = {r["model"] for r in comparison if r["phase"] == run.phase and r["best"]}
    out = {}
    for spec in specs:
        if not spec.is_tree_model or spec.name not in best:
            continue
        exps = explain_rows(run.models[spec.name], X, run.matrix.column_names)
        out[spec.name] = {
            "global_ranking": global_importance(exps).to_json(),
            "max_abs_additivity_residual": max(abs(e.additivity_residual) for e in exps),
            "instances": [{"id": rid, **e.to_json()} for rid, e in zip(ids, exps)],
        }
    return out


def audit_records(curated: list[CuratedRecord], cfg: PipelineConfig) -> audit_mod.LeakageReport:
    """Leakage audit on the subset with both effective masses present."""
    subset = [r for r in curated if all(r.number(f) is not None for f in HIGH_RISK_FIELDS)]
    base = build_matrix(subset, "I", cfg.features)
    full = base
    for f in HIGH_RISK_FIELDS:
        full = full.with_column(f, [r.number(f) for r in subset])
    split = split_for(len(subset), cfg)
    return audit_mod.run_audit(full, list(HIGH_RISK_FIELDS), cfg.audit_specs(), split, cfg.registry, cfg.thresholds)


# -- orchestration --------------------------------------------------------


def write_report(path, payload, cfg: PipelineConfig) -> None:
    """Strict JSON stamped with the config hash and seed."""
    stamp = {"config_hash": cfg.config_hash(), "seed": cfg.seed}
    body = {**stamp, **payload} if isinstance(payload, dict) else {**stamp, "data": payload}
    dump_json(_clean(body), Path(path))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Run:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.stamp = {"config_hash": cfg.config_hash(), "seed": cfg.seed}
        self.files: list[str] = []

    def json(self, name: str, payload) -> None:
        write_report(self.out / name, payload, self.cfg)
        self.files.append(name)

    def track(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def manifest(self, status: str, failed_stage: str | None = None, error: str | None = None) -> None:
        entries = [{"file": f, "sha256": _sha256(self.out / f)} for f in sorted(set(self.files))]
        body = {**self.stamp, "status": status, "files": entries}
        if failed_stage:
            body["failed_stage"] = failed_stage
            body["error"] = error
        dump_json(body, self.out / "manifest.json")


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage, writing reports into ``cfg.out_dir``; returns the manifest.

    On a stage failure the outputs written so far are kept, ``manifest.json``
    records ``status: failed`` with the stage name, and :class:`StageError`
    is raised.
    """
    cfg.validate()
    run = _Run(cfg)
    run.out.mkdir(parents=True, exist_ok=True)
    stage = "ingest"
    try:
        records, merge_report = ingest_stage(cfg.inputs)
        merge_report["input_sha256"] = {Path(p).name: _sha256(Path(p)) for p in cfg.inputs}
        run.json("ingest_report.json", merge_report)

        stage = "curate"
        curated, funnel = apply_filters(records, cfg.filters)
        with open(run.track("curated.jsonl"), "w") as fp:
            write_records(curated, fp)
        run.json("curation_funnel.json", {"stages": funnel.to_json(), "final_count": funnel.final_count})

        stage = "integrity"
        run.json("integrity.json", integrity_report(records, curated, standardize=cfg.pca_standardize))

        stage = "features"
        matrices = {ph: build_matrix(curated, ph, cfg.features) for ph in PHASES}
        for ph, m in matrices.items():
            m.to_csv(run.track(f"features_phase{ph}.csv"))
            run.files.append(f"features_phase{ph}.csv.json")
        split = split_for(len(curated), cfg)
        ids = matrices["I"].row_ids
        run.json(
            "split.json",
            {
                "train_fraction": cfg.train_fraction,
                "n": len(ids),
                "train_ids": [ids[i] for i in split.train_indices],
                "test_ids": [ids[i] for i in split.test_indices],
            },
        )

        stage = "select"
        selected, select_report = selection_stage(matrices["III"], cfg, split)
        run.json("selection.json", select_report)
        phase_mats = {"I": matrices["I"], "II": matrices["II"], "III": selected}

        stage = "train"
        specs = cfg.model_specs()
        runs = [train_phase(phase_mats[ph], specs, split) for ph in PHASES]
        for r in runs:
            if [r.matrix.row_ids[i] for i in split.test_indices] != [ids[i] for i in split.test_indices]:
                raise AssertionError("phases disagree on test rows")
        comparison = phase_comparison(runs, specs)
        run.json("metrics.json", metrics_payload(runs, comparison))
        write_comparison_csv(comparison, run.track("phase_comparison.csv"))
        residuals = parity_reports(runs, comparison, split, run.out)
        for phase in residuals.values():
            run.files.extend(entry["parity_file"] for entry in phase.values())
        run.json("residuals.json", {"phases": residuals})

        stage = "shap"
        run.json("shap.json", {"phases": {r.phase: shap_stage(r, specs, split, comparison, cfg.shap_max_rows) for r in runs}})

        stage = "audit"
        report = audit_records(curated, cfg)
        run.json("audit.json", report.to_json())
    except Exception as exc:
        log.error("stage %s failed: %s", stage, exc)
        run.manifest("failed", stage, f"{type(exc).__name__}: {exc}")
        raise StageError(stage, exc) from exc

    run.json("config_resolved.json", cfg.to_json())
    run.manifest("ok")
    with open(run.out / "manifest.json") as fp:
        return json.load(fp)
