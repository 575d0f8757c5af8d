"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines inline (they
are also printed without ``-s``).
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from gapaudit.audit import run_audit
from gapaudit.config import PipelineConfig
from gapaudit.explain import brute_force_shap, explain_rows, tree_shap
from gapaudit.features.descriptors import phase3_descriptors
from gapaudit.features.elements import ElementTable
from gapaudit.features.formula import parse_formula
from gapaudit.integrity import ks_two_sample, pca_explained_variance, range_preservation
from gapaudit.learn.ensemble import ForestParams, GbtParams, fit_forest, fit_gbt
from gapaudit.learn.linear import RidgeParams, fit_ridge
from gapaudit.learn.metrics import evaluate
from gapaudit.learn.presets import resolve_model
from gapaudit.learn.split import SplitSpec, make_split
from gapaudit.learn.tree import TreeParams
from gapaudit.pipeline import run_pipeline
from gapaudit.synth import synth_matrix
from conftest import random_tree


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")

    return emit


def test_c1_treeshap_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        p = int(rng.integers(1, 9))
        tree = random_tree(rng, p, int(rng.integers(1, 5)))
        for x in rng.uniform(-1.2, 1.2, size=(100, p)):
            worst = max(worst, float(np.max(np.abs(tree_shap(tree, x) - brute_force_shap(tree, x)))))

    X = rng.uniform(-1, 1, size=(300, 6))
    y = np.sin(3 * X[:, 0]) + X[:, 1] * X[:, 2] + 0.1 * rng.normal(size=300)
    ensembles = [
        fit_forest(X, y, ForestParams(n_estimators=30, tree=TreeParams(max_depth=None))),
        fit_gbt(X, y, GbtParams(n_estimators=100, learning_rate=0.1, max_depth=4)),
    ]
    names = [f"f{i}" for i in range(6)]
    additivity = max(abs(e.additivity_residual) for m in ensembles for e in explain_rows(m, X, names))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and additivity <= 1e-8 and elapsed < 60
    report(1, ok, f"max|tree-brute|={worst:.2e} (<=1e-9), additivity={additivity:.2e} (<=1e-8), {elapsed:.1f}s (<60s)")
    assert worst <= 1e-9
    assert additivity <= 1e-8
    assert elapsed < 60


@pytest.mark.slow
def test_c2_leak_detector(report):
    t0 = time.perf_counter()
    models = ["rf-conservative", "xgb-conservative"]
    leak_hits = noise_hits = signature = 0
    for seed in range(20):
        m, leak = synth_matrix(2000, 10, 0.05, seed)
        noisy, _ = synth_matrix(2000, 10, 10.0, seed)
        m = m.with_column("noise10", noisy.column(leak))
        rep = run_audit(m, [leak, "noise10"], models, make_split(m.n, SplitSpec(seed=seed)))
        leak_entry = rep.candidates[0]
        leak_hits += leak_entry.verdict == "flagged"
        noise_hits += rep.candidates[1].verdict == "flagged"
        signature += all(
            leak_entry.delta_r2[k] >= 0.05 and 1 - leak_entry.mae_ratio[k] >= 0.25 for k in leak_entry.delta_r2
        )
    elapsed = time.perf_counter() - t0
    ok = leak_hits >= 19 and signature >= 19 and noise_hits <= 1 and elapsed < 300
    report(
        2,
        ok,
        f"leak flagged {leak_hits}/20 (>=19), dR2>=0.05 & MAE-25% in {signature}/20, "
        f"noise10 flagged {noise_hits}/20 (<=1), {elapsed:.0f}s (<300s)",
    )
    assert leak_hits >= 19 and signature >= 19
    assert noise_hits <= 1
    assert elapsed < 300


def test_c3_formula_fidelity(report):
    toy = "symbol,chi,radius_pm,ns,np,nd,nf\n"
    dchi = math.sqrt(8.29)
    ionic = phase3_descriptors(parse_formula("NaCl"), ElementTable.from_csv(toy + f"Na,1.0,100,1,0,0,0\nCl,{1 + dchi!r},100,2,5,0,0\n"))
    b = 104.5 / 1.85
    homog = phase3_descriptors(parse_formula("CsF3"), ElementTable.from_csv(toy + f"Cs,1.0,{b!r},1,0,0,0\nF,2.0,10,2,5,0,0\n"))
    si = phase3_descriptors(parse_formula("Si"))
    degenerate = {
        "bond_polarity_index": 0.0,
        "pauling_ionicity_proxy": 0.0,
        "radius_mismatch": 0.0,
        "atomic_size_homogeneity": 1.0,
        "atomic_size_uniformity": 1.0,
    }
    exact = all(si[k] == v for k, v in degenerate.items())
    ion_ok = abs(ionic["bond_polarity_index"] - 8.29) < 1e-9 and abs(ionic["pauling_ionicity_proxy"] - 0.874) <= 0.005
    hom_ok = abs(homog["radius_mismatch"] - 2.15) < 1e-9 and abs(homog["atomic_size_homogeneity"] - 0.317) <= 0.005
    report(
        3,
        ion_ok and hom_ok and exact,
        f"ionicity={ionic['pauling_ionicity_proxy']:.4f} (0.874+-0.005), "
        f"homogeneity={homog['atomic_size_homogeneity']:.4f} (0.317+-0.005), single-element exact={exact}",
    )
    assert ion_ok and hom_ok and exact
    assert len(si) == 11


def test_c4_statistics(report):
    same = ks_two_sample([1, 2, 3], [1, 2, 3])
    disjoint = ks_two_sample([0, 0, 0], [1, 1, 1])
    x = np.arange(10.0)
    rank1 = pca_explained_variance(np.column_stack([x, x])).explained_variance_ratios
    rnd = pca_explained_variance(np.random.default_rng(0).normal(size=(50, 6))).explained_variance_ratios
    rng_frac = range_preservation([0, 10], [2, 5]).preserved_fraction
    checks = {
        "ks_identical": same.d_statistic == 0 and abs(same.p_value - 1) < 1e-9,
        "ks_disjoint": disjoint.d_statistic == 1,
        "pca_rank1": np.allclose(rank1, [1.0, 0.0], atol=1e-12),
        "pca_sum": abs(sum(rnd) - 1) <= 1e-9 and abs(sum(rank1) - 1) <= 1e-9,
        "range": abs(rng_frac - 0.30) < 1e-12,
    }
    report(4, all(checks.values()), ", ".join(f"{k}={'ok' if v else 'bad'}" for k, v in checks.items()))
    assert all(checks.values()), checks


def test_c5_model_sanity(report):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(120, 7)) * [1, 20, 0.05, 3, 1, 7, 2] + 4
    y = X @ rng.normal(size=7) + rng.normal(size=120)
    ridge = fit_ridge(X, y, RidgeParams(alpha=1.0))
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    w = np.linalg.solve(Z.T @ Z + np.eye(7), Z.T @ (y - y.mean()))
    ridge_err = float(np.max(np.abs(ridge.weights - w)))

    m, leak = synth_matrix(2000, 10, 0.05, 42, hidden_share=0.0)
    clean = m.drop([leak])
    split = make_split(clean.n, SplitSpec(seed=42, train_fraction=0.8))
    tr, te = split.train_indices, split.test_indices
    gbt = resolve_model("xgb-conservative").fit(clean.rows[tr], clean.target[tr])
    loss = np.diff(gbt.train_loss)
    r2 = evaluate(gbt, clean.rows[te], clean.target[te]).r2
    ok = ridge_err <= 1e-10 and np.all(loss <= 0) and r2 >= 0.9 and len(tr) == 1600
    report(5, ok, f"ridge max err={ridge_err:.1e} (<=1e-10), GBT loss non-increasing={bool(np.all(loss <= 0))}, xgb-conservative R2={r2:.4f} (>=0.9)")
    assert ridge_err <= 1e-10
    assert np.all(loss <= 0)
    assert r2 >= 0.9 and len(tr) == 1600


def test_c6_determinism(report, tmp_path, pipeline_inputs, small_config):
    outs = [tmp_path / "run1", tmp_path / "run2"]
    for out in outs:
        run_pipeline(small_config(pipeline_inputs, out))
    names = sorted(p.name for p in outs[0].iterdir())
    differing = [n for n in names if (outs[0] / n).read_bytes() != (outs[1] / n).read_bytes()]
    same_listing = names == sorted(p.name for p in outs[1].iterdir())
    test_ids = []
    for ph in ("I", "II", "III"):
        rows = (outs[0] / f"parity_phase{ph}_ridge.csv").read_text().splitlines()[1:]
        test_ids.append([r.split(",")[0] for r in rows])
    ids_equal = test_ids[0] == test_ids[1] == test_ids[2] and len(test_ids[0]) > 0
    ok = same_listing and not differing and ids_equal
    report(6, ok, f"{len(names)} files byte-identical={not differing and same_listing}, phase test ids identical={ids_equal}")
    assert same_listing and not differing, differing
    assert ids_equal


SNAPSHOT = os.environ.get("GAPAUDIT_SNAPSHOT_DIR")


@pytest.mark.snapshot
def test_c7_snapshot_reproduction(report, capsys, tmp_path):
    if not SNAPSHOT:
        with capsys.disabled():
            print("\nSKIP criterion 7: GAPAUDIT_SNAPSHOT_DIR not set; snapshot reproduction is optional")
        pytest.skip("GAPAUDIT_SNAPSHOT_DIR not set")
    inputs = sorted(str(p) for p in Path(SNAPSHOT).iterdir() if p.suffix in (".jsonl", ".json", ".csv"))[:2]
    cfg = PipelineConfig(inputs=inputs, out_dir=str(tmp_path / "out"))
    run_pipeline(cfg)
    out = Path(cfg.out_dir)

    def load(name):
        return json.loads((out / name).read_text())

    stages = {s["stage"]: s for s in load("curation_funnel.json")["stages"]}
    funnel = {
        51905: stages["completeness"]["in"],
        34969: stages["completeness"]["out"],
        9459: stages["space_group"]["out"],
        5355: stages["dimensionality"]["out"],
        2280: stages["max_efg"]["out"],
    }
    funnel_ok = all(abs(got - ref) <= 0.05 * ref for ref, got in funnel.items())
    d = load("integrity.json")["ks"]["d_statistic"]
    rows = load("metrics.json")["comparison"]
    tree_r2 = [r["r2"] for r in rows if r["family"] != "ridge"]
    r2_ok = all(0.85 <= r <= 0.93 for r in tree_r2)
    best_size = load("selection.json")["best_size"]
    shap = load("shap.json")["phases"]["III"]
    dielectric_top = all(
        any(f["feature"] in ("epsx", "epsy", "epsz") for f in entry["global_ranking"][:3]) for entry in shap.values()
    )
    checks = {
        "funnel": funnel_ok,
        "ks_d": abs(d - 0.0562) <= 0.01,
        "tree_r2": r2_ok,
        "sweep_peak": abs(best_size - 110) <= 15,
        "dielectric_top3": dielectric_top,
    }
    report(7, all(checks.values()), f"funnel={funnel}, d={d:.4f}, best_size={best_size}, " + ", ".join(f"{k}={v}" for k, v in checks.items()))
    assert all(checks.values()), checks
