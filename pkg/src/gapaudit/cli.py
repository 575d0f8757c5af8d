"""Command-line entry point.

Settings resolve in this order, later winning: built-in defaults, ``--config``
file, explicit flags. ``GAPAUDIT_LOG_LEVEL`` sets the log level.

Exit codes: 0 success, 1 validation error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from gapaudit import pipeline as pl
from gapaudit.config import ConfigError, PipelineConfig, load_config
from gapaudit.curate import CuratedRecord, apply_filters
from gapaudit.features.descriptors import build_matrix
from gapaudit.features.matrix import FeatureMatrix
from gapaudit.ingest import read_records, write_records
from gapaudit.integrity import integrity_report
from gapaudit.learn.presets import resolve_model
from gapaudit.synth import split_sources, synth_records

log = logging.getLogger("gapaudit")

EXIT_OK, EXIT_INVALID, EXIT_STAGE = 0, 1, 2


def _config(args) -> PipelineConfig:
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "models", None):
        cfg.models = list(args.models)
    return cfg


def _read_curated(path) -> list[CuratedRecord]:
    with open(path) as fp:
        return [CuratedRecord.from_json(json.loads(line)) for line in fp if line.strip()]


def _need(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"input file not found: {p}")
    return p


def _write_jsonl(records, path) -> None:
    with open(path, "w") as fp:
        write_records(records, fp)


def cmd_ingest(args, cfg):
    records, report = pl.ingest_stage([str(_need(p)) for p in args.input])
    _write_jsonl(records, args.out)
    if args.report:
        pl.write_report(args.report, report, cfg)
    print(f"{len(records)} unique records -> {args.out}")


def cmd_curate(args, cfg):
    curated, funnel = apply_filters(read_records(_need(args.input)), cfg.filters)
    _write_jsonl(curated, args.out)
    if args.funnel:
        pl.write_report(args.funnel, {"stages": funnel.to_json(), "final_count": funnel.final_count}, cfg)
    print(f"{funnel.final_count} curated records -> {args.out}")


def cmd_integrity(args, cfg):
    raw = read_records(_need(args.raw))
    curated = read_records(_need(args.curated))
    pl.write_report(args.out, integrity_report(raw, curated, standardize=cfg.pca_standardize), cfg)


def cmd_features(args, cfg):
    curated = _read_curated(_need(args.input))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for ph in pl.PHASES if args.phase == "all" else [args.phase]:
        build_matrix(curated, ph, cfg.features).to_csv(out / f"features_phase{ph}.csv")


def _matrix(path) -> FeatureMatrix:
    return FeatureMatrix.from_csv(_need(path))


def cmd_select(args, cfg):
    m = _matrix(args.features)
    selected, report = pl.selection_stage(m, cfg, pl.split_for(m.n, cfg))
    pl.write_report(args.out, report, cfg)
    if args.selected_out:
        selected.to_csv(args.selected_out)
    print(f"best subset size {report['best_size']} of {report['columns_after_filters']}")


def cmd_train(args, cfg):
    mats = [_matrix(p) for p in args.features]
    if len({tuple(m.row_ids) for m in mats}) != 1:
        raise ConfigError("feature files must hold the same rows in the same order")
    split = pl.split_for(mats[0].n, cfg)
    specs = cfg.model_specs()
    runs = [pl.train_phase(m, specs, split) for m in mats]
    comparison = pl.phase_comparison(runs, specs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pl.write_report(out / "metrics.json", pl.metrics_payload(runs, comparison), cfg)
    pl.write_comparison_csv(comparison, out / "phase_comparison.csv")
    pl.write_report(out / "residuals.json", {"phases": pl.parity_reports(runs, comparison, split, out)}, cfg)


def cmd_shap(args, cfg):
    m = _matrix(args.features)
    spec = resolve_model(args.model)
    if not spec.is_tree_model:
        raise ConfigError(f"{spec.name} is not a tree model")
    split = pl.split_for(m.n, cfg)
    run = pl.train_phase(m, [spec], split)
    best = [{"phase": m.phase, "model": spec.name, "best": True}]
    pl.write_report(args.out, {"phases": {m.phase: pl.shap_stage(run, [spec], split, best, cfg.shap_max_rows)}}, cfg)


def cmd_audit(args, cfg):
    report = pl.audit_records(_read_curated(_need(args.input)), cfg)
    pl.write_report(args.out, report.to_json(), cfg)
    for feature, verdict in report.verdicts.items():
        print(f"{feature}: {verdict}")


def cmd_pipeline(args, cfg):
    if args.out:
        cfg.out_dir = args.out
    if args.input:
        cfg.inputs = list(args.input)
    manifest = pl.run_pipeline(cfg)
    print(f"{len(manifest['files'])} reports -> {cfg.out_dir}")


def cmd_synth(args, cfg):
    records = synth_records(n=args.n, leak_noise_fraction=args.leak, seed=args.seed if args.seed is not None else 7)
    if args.second_out:
        a, b = split_sources(records, seed=args.seed or 0)
        _write_jsonl(a, args.out)
        _write_jsonl(b, args.second_out)
    else:
        _write_jsonl(records, args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gapaudit", description="Leakage-aware bandgap regression workflow.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON config file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="normalize, merge and deduplicate raw records")
    p.add_argument("--input", action="append", required=True, help="JSONL or CSV source (repeat for a second source)")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("curate", parents=[common], help="apply the physical-validity filters")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--funnel")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("integrity", parents=[common], help="K-S, PCA and range checks")
    p.add_argument("--raw", required=True)
    p.add_argument("--curated", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_integrity)

    p = sub.add_parser("features", parents=[common], help="write phase feature matrices")
    p.add_argument("--input", required=True, help="curated JSONL")
    p.add_argument("--phase", choices=[*pl.PHASES, "all"], default="all")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("select", parents=[common], help="filters, ranking and subset sweep")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--selected-out", help="write the selected matrix as CSV")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", parents=[common], help="fit every model on each feature file")
    p.add_argument("--features", action="append", required=True)
    p.add_argument("--models", nargs="+", help="preset names")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("shap", parents=[common], help="TreeSHAP attributions on test rows")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True, help="tree preset name")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_shap)

    p = sub.add_parser("audit", parents=[common], help="incremental-impact leakage audit")
    p.add_argument("--input", required=True, help="curated JSONL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("pipeline", parents=[common], help="run every stage")
    p.add_argument("--out", help="output directory")
    p.add_argument("--input", action="append", help="override configured inputs")
    p.add_argument("--models", nargs="+", help="preset names")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic record fixture")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--leak", type=float, default=0.05, help="leak noise as a fraction of target std")
    p.add_argument("--out", required=True)
    p.add_argument("--second-out", help="also split into two overlapping sources")
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("GAPAUDIT_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except pl.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except Exception as exc:  # standalone stage commands
        print(f"error: stage '{args.command}' failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
