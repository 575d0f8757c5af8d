import math

import numpy as np
import pytest

from gapaudit.audit import (
    CandidateEntry,
    FlagThresholds,
    LeakageProtocolError,
    baseline_eval,
    default_registry,
    flag,
    incremental_impact,
    run_audit,
)
from gapaudit.learn.metrics import Metrics
from gapaudit.learn.split import SplitSpec, make_split
from gapaudit.synth import synth_matrix

FAST = [{"preset": "rf-conservative", "n_estimators": 20}, {"preset": "xgb-conservative", "n_estimators": 60}]


def entry(delta, ratio, name="c"):
    m = Metrics(0.5, 1.0, 1.0, 0.0, 1.0)
    return CandidateEntry(name, {k: m for k in delta}, dict(delta), dict(ratio))


def test_flag_large_gain():
    assert flag([entry({"a": 0.12}, {"a": 0.55})]) == {"c": "flagged"}


def test_flag_small_gain_clean():
    assert flag([entry({"a": 0.01}, {"a": 0.55})]) == {"c": "clean"}


def test_flag_needs_both_criteria():
    # big R2 gain but MAE only 5% lower
    assert flag([entry({"a": 0.06}, {"a": 0.95})]) == {"c": "clean"}


def test_flag_boundaries_inclusive():
    assert flag([entry({"a": 0.05}, {"a": 0.75})]) == {"c": "flagged"}


def test_flag_majority_rounded_up():
    half = entry({"a": 0.2, "b": 0.0}, {"a": 0.5, "b": 1.0})
    assert flag([half])["c"] == "flagged"
    minority = entry({"a": 0.2, "b": 0.0, "c": 0.0}, {"a": 0.5, "b": 1.0, "c": 1.0})
    assert flag([minority])["c"] == "clean"


def test_flag_nan_never_votes():
    assert flag([entry({"a": math.nan}, {"a": 0.1})]) == {"c": "clean"}


def test_thresholds_validated():
    with pytest.raises(ValueError):
        FlagThresholds(min_delta_r2=-0.1)


def test_registry_defaults():
    reg = default_registry()
    assert sorted(reg.high_risk()) == ["avg_elec_mass", "avg_hole_mass"]
    assert reg.level("epsx") == "medium" and reg.level("unknown_descriptor") == "low"
    assert set(reg.to_json()["rationale"]) == set(reg.levels)


@pytest.fixture(scope="module")
def fixture():
    m, leak = synth_matrix(600, 6, 0.05, seed=3)
    return m, leak, make_split(m.n, SplitSpec(seed=3))


def test_baseline_rejects_high_risk(fixture):
    m, _, split = fixture
    tainted = m.with_column("avg_elec_mass", m.target)
    with pytest.raises(LeakageProtocolError, match="avg_elec_mass"):
        baseline_eval(tainted, ["ridge"], split)


def test_candidate_row_mismatch(fixture):
    m, leak, split = fixture
    base = m.drop([leak])
    bl = baseline_eval(base, ["ridge"], split)
    with pytest.raises(LeakageProtocolError, match="rows"):
        incremental_impact(base, "extra", np.zeros(m.n - 1), ["ridge"], split, bl)
    with pytest.raises(LeakageProtocolError):
        incremental_impact(base, "x0", m.column("x0"), ["ridge"], split, bl)


def test_leak_flagged_noise_clean(fixture):
    m, leak, split = fixture
    noise = np.random.default_rng(9).normal(size=m.n)
    m2 = m.with_column("noise", noise)
    rep = run_audit(m2, [leak, "noise"], FAST, split)
    assert rep.verdicts == {leak: "flagged", "noise": "clean"}
    assert rep.baseline_columns == [f"x{i}" for i in range(6)]
    ent = rep.candidates[0]
    assert all(d >= 0.05 for d in ent.delta_r2.values())
    assert all(r <= 0.75 for r in ent.mae_ratio.values())


def test_same_split_for_every_fit(fixture):
    m, leak, split = fixture
    a = run_audit(m, [leak], ["ridge"], split)
    b = run_audit(m, [leak], ["ridge"], split)
    assert a.to_json() == b.to_json()
    assert a.candidates[0].metrics["ridge"].n == len(split.test_indices)
