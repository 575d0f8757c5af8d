import json

import pytest

from gapaudit.config import ConfigError, PipelineConfig, config_from_dict, load_config


def test_defaults():
    cfg = PipelineConfig()
    assert cfg.seed == 42 and cfg.train_fraction == 0.8 and cfg.shap_max_rows == 100
    assert cfg.thresholds.min_delta_r2 == 0.05 and cfg.thresholds.min_mae_reduction == 0.25


def test_toml_loading(tmp_path):
    (tmp_path / "data.jsonl").write_text("")
    p = tmp_path / "cfg.toml"
    p.write_text(
        'inputs = ["data.jsonl"]\nseed = 7\nmodels = ["ridge", {preset="rf-conservative", n_estimators=5}]\n'
        "[filters]\neps_cap = 50.0\n[select]\ncorrelation_cutoff = 0.9\n"
        "[select.ranking_model]\nn_estimators = 3\n[audit]\nmin_delta_r2 = 0.1\nrisk = {epsx = \"high\"}\n"
    )
    cfg = load_config(p)
    assert cfg.inputs == [str(tmp_path / "data.jsonl")]
    assert cfg.seed == 7 and cfg.filters.eps_cap == 50.0 and cfg.select.correlation_cutoff == 0.9
    assert cfg.select.ranking_model.n_estimators == 3
    assert cfg.thresholds.min_delta_r2 == 0.1 and cfg.registry.level("epsx") == "high"
    assert [s.name for s in cfg.model_specs()][0] == "ridge"
    cfg.validate()


def test_json_loading(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"seed": 3, "shap_max_rows": 5}))
    cfg = load_config(p)
    assert cfg.seed == 3 and cfg.shap_max_rows == 5


@pytest.mark.parametrize("data", [{"bogus": 1}, {"filters": {"nope": 1}}, {"audit": {"weird": 2}}])
def test_unknown_keys(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_missing_and_unparsable(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = = 3")
    with pytest.raises(ConfigError):
        load_config(bad)


@pytest.mark.parametrize(
    "change",
    [
        {"inputs": []},
        {"seed": -1},
        {"seed": True},
        {"seed": "42"},
        {"shap_max_rows": 0},
        {"train_fraction": 1.0},
        {"models": ["no-such-preset"]},
        {"models": ["ridge", "ridge"]},
    ],
)
def test_validation_errors(tmp_path, change):
    (tmp_path / "d.jsonl").write_text("")
    cfg = PipelineConfig(inputs=[str(tmp_path / "d.jsonl")])
    for k, v in change.items():
        setattr(cfg, k, v)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_missing_input_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        PipelineConfig(inputs=[str(tmp_path / "nope.jsonl")]).validate()


def test_hash_stable_and_sensitive(tmp_path):
    a = PipelineConfig(inputs=[str(tmp_path / "x.jsonl")], out_dir="o1")
    b = PipelineConfig(inputs=["/elsewhere/x.jsonl"], out_dir="o2")
    assert a.config_hash() == b.config_hash()
    b.seed = 1
    assert a.config_hash() != b.config_hash()
