import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from _helpers import MIXED, TYPE_ONLY, probes, random_dataset
from afdm import snapshot
from afdm.bagging import BootstrapBagging, OnlineBagging
from afdm.baselines import BatchTree, LogisticRegression
from afdm.data import FeatureVector, SchemaError
from afdm.hoeffding import HoeffdingTree
from afdm.knn import WindowedKNN
from afdm.naive_bayes import NaiveBayesUpdateable

SCHEMA_DIR = Path(__file__).resolve().parents[1] / "docs" / "schemas"

INCREMENTAL = {
    "nb": lambda: NaiveBayesUpdateable(MIXED),
    "ht": lambda: HoeffdingTree(MIXED, grace_period=40),
    "knn": lambda: WindowedKNN(MIXED, k=3, window_capacity=150),
    "bag_nb": lambda: OnlineBagging(NaiveBayesUpdateable(MIXED), 5, seed=3),
    "bag_ht": lambda: OnlineBagging(HoeffdingTree(MIXED, grace_period=40), 3, seed=4),
}
BATCH = {
    "tree": lambda: BatchTree(),
    "logistic": lambda: LogisticRegression(epochs=50),
    "bootstrap": lambda: BootstrapBagging(BatchTree, 3, seed=2),
}


def _trained(name):
    ds = random_dataset(MIXED, 400, seed=1)
    if name in INCREMENTAL:
        m = INCREMENTAL[name]()
        m.update_many(ds)
        return m
    return BATCH[name]().fit(ds)


@pytest.mark.parametrize("name", [*INCREMENTAL, *BATCH])
def test_round_trip_is_byte_identical(name):
    text = snapshot.dumps(snapshot.to_snapshot(_trained(name)))
    again = snapshot.dumps(snapshot.to_snapshot(snapshot.loads(text)))
    assert again == text


@pytest.mark.parametrize("name", [*INCREMENTAL, *BATCH])
def test_restored_predictions_match(name, tmp_path):
    model = _trained(name)
    path = tmp_path / "m.json"
    snapshot.save(model, path)
    back = snapshot.restore(path, MIXED)
    ps = probes(MIXED, 200)
    assert np.allclose(back.predict_many(ps), model.predict_many(ps), atol=1e-12, rtol=0)
    assert back.n_seen == model.n_seen


@pytest.mark.parametrize("name", list(INCREMENTAL))
def test_restored_learner_keeps_learning_identically(name):
    model = _trained(name)
    back = snapshot.loads(snapshot.dumps(snapshot.to_snapshot(model)))
    more = random_dataset(MIXED, 300, seed=2)
    model.update_many(more)
    back.update_many(more)
    assert back.get_state() == model.get_state()


@pytest.mark.parametrize("name", list(INCREMENTAL))
def test_untrained_snapshot_predicts_uniform(name):
    back = snapshot.loads(snapshot.dumps(snapshot.to_snapshot(INCREMENTAL[name]())))
    assert back.predict_proba(FeatureVector((0, 1.0, 1, 1.0))) == (0.5, 0.5)


def test_snapshot_validates_against_json_schema():
    doc = json.loads((SCHEMA_DIR / "snapshot.schema.json").read_text())
    for name in [*INCREMENTAL, *BATCH]:
        jsonschema.validate(snapshot.to_snapshot(_trained(name)), doc)


def test_metadata_recorded():
    snap = snapshot.to_snapshot(_trained("nb"), {"seed": 7})
    assert snap["metadata"]["library"] == "afdm"
    assert snap["metadata"]["seed"] == 7


def _snap():
    return snapshot.to_snapshot(_trained("nb"))


def test_unsupported_version():
    snap = _snap()
    snap["format_version"] = 2
    with pytest.raises(snapshot.VersionError) as exc:
        snapshot.from_snapshot(snap)
    assert "format_version 2" in str(exc.value)


def test_tampered_algorithm_tag():
    snap = _snap()
    snap["algorithm"] = "random_forest"
    with pytest.raises(snapshot.SnapshotError):
        snapshot.from_snapshot(snap)
    snap["algorithm"] = "hoeffding_tree"
    with pytest.raises(snapshot.SnapshotError):
        snapshot.from_snapshot(snap)


def test_missing_field_and_corrupt_state():
    snap = _snap()
    del snap["state"]
    with pytest.raises(snapshot.SnapshotError):
        snapshot.from_snapshot(snap)
    snap = _snap()
    snap["n_seen"] += 1
    with pytest.raises(snapshot.SnapshotError):
        snapshot.from_snapshot(snap)
    with pytest.raises(snapshot.SnapshotError):
        snapshot.loads("{not json")


def test_schema_mismatch():
    with pytest.raises(SchemaError):
        snapshot.from_snapshot(_snap(), TYPE_ONLY)


def test_unfitted_batch_model_rejected():
    with pytest.raises(snapshot.SnapshotError):
        snapshot.to_snapshot(BatchTree())
