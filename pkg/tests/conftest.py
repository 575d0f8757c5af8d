import numpy as np
import pytest

from gapaudit.curate import CuratedRecord
from gapaudit.ingest import RawRecord
from gapaudit.learn.tree import RegressionTree

VALID = {
    "formation_energy_per_atom": -1.0,
    "ehull": 0.01,
    "density": 5.0,
    "nat": 4,
    "dimensionality": "3D",
    "spg_number": 225,
    "bulk_modulus_kv": 250.0,
    "shear_modulus_gv": 150.0,
    "poisson": 0.3,
    "epsx": 5.0,
    "epsy": 5.0,
    "epsz": 5.0,
    "max_efg": 1.5,
    "optb88vdw_bandgap": 1.2,
}


@pytest.fixture
def valid_values():
    return dict(VALID)


@pytest.fixture
def make_record():
    def make(rid="r1", formula="NaCl", **overrides):
        values = dict(VALID)
        values.update(overrides)
        return RawRecord(rid, formula, values)

    return make


@pytest.fixture
def make_curated():
    def make(rid="c1", formula="NaCl", is_3D=True, **overrides):
        values = dict(VALID)
        values.update(overrides)
        return CuratedRecord(rid, formula, values, is_3D=is_3D, max_efg=float(values["max_efg"]))

    return make


def random_tree(rng: np.random.Generator, p: int, max_depth: int) -> RegressionTree:
    """Random tree with consistent integer covers, built in preorder."""
    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def grow(depth: int, n: int) -> int:
        idx = len(feature)
        for arr in (feature, threshold, left, right, value, cover):
            arr.append(0)
        cover[idx] = float(n)
        if depth >= max_depth or n < 2 or (depth > 0 and rng.random() < 0.25):
            feature[idx], left[idx], right[idx] = -1, -1, -1
            value[idx] = float(rng.normal())
            return idx
        nl = int(rng.integers(1, n))
        feature[idx] = int(rng.integers(p))
        threshold[idx] = float(rng.uniform(-1, 1))
        value[idx] = 0.0
        left[idx] = grow(depth + 1, nl)
        right[idx] = grow(depth + 1, n - nl)
        return idx

    grow(0, int(rng.integers(20, 200)))
    return RegressionTree(feature, threshold, left, right, value, cover, n_features=p)


@pytest.fixture
def tree_factory():
    return random_tree


SMALL_MODELS = [
    "ridge",
    {"preset": "rf-conservative", "n_estimators": 20},
    {"preset": "xgb-conservative", "n_estimators": 30},
]


@pytest.fixture(scope="session")
def pipeline_inputs(tmp_path_factory):
    """Two overlapping synthetic sources on disk."""
    from gapaudit.ingest import write_records
    from gapaudit.synth import split_sources, synth_records

    d = tmp_path_factory.mktemp("inputs")
    a, b = split_sources(synth_records(n=600, seed=7), seed=7)
    paths = []
    for name, recs in (("a.jsonl", a), ("b.jsonl", b)):
        with open(d / name, "w") as fp:
            write_records(recs, fp)
        paths.append(str(d / name))
    return paths


@pytest.fixture(scope="session")
def small_config():
    """Pipeline config with scaled-down models so a full run takes seconds."""
    from gapaudit.config import PipelineConfig
    from gapaudit.learn.ensemble import GbtParams

    def make(inputs, out_dir):
        cfg = PipelineConfig(inputs=list(inputs), out_dir=str(out_dir))
        cfg.models = list(SMALL_MODELS)
        cfg.sweep_model = {"preset": "xgb-conservative", "n_estimators": 20}
        cfg.audit_models = [{"preset": "rf-conservative", "n_estimators": 30}, {"preset": "xgb-conservative", "n_estimators": 50}]
        cfg.shap_max_rows = 20
        cfg.select.ranking_model = GbtParams(n_estimators=20, learning_rate=0.3, max_depth=4)
        return cfg

    return make
