"""Versioned JSON snapshots of trained models.

A snapshot is one JSON object::

    {"format_version": 1, "algorithm": "...", "schema": {...}, "n_seen": N,
     "params": {...}, "state": {...}, "metadata": {...}}

Serialization is canonical (sorted keys, fixed separators, shortest
round-trip float repr), so saving a restored model reproduces the file byte
for byte.
"""
from __future__ import annotations

import json
import os

from .bagging import BootstrapBagging, OnlineBagging
from .baselines import BatchTree, LogisticRegression
from .base import BatchModel, Model
from .data import DatasetSchema, SchemaError
from .hoeffding import HoeffdingTree
from .knn import WindowedKNN
from .naive_bayes import NaiveBayesUpdateable

FORMAT_VERSION = 1

REGISTRY: dict[str, type] = {
    cls.algorithm: cls
    for cls in (NaiveBayesUpdateable, HoeffdingTree, WindowedKNN, OnlineBagging,
                BootstrapBagging, BatchTree, LogisticRegression)
}
_ENSEMBLES = (OnlineBagging, BootstrapBagging)
_KEYS = ("format_version", "algorithm", "schema", "n_seen", "params", "state", "metadata")


class SnapshotError(ValueError):
    pass


class VersionError(SnapshotError):
    def __init__(self, found, expected: int = FORMAT_VERSION):
        super().__init__(f"snapshot format_version {found!r} is not supported "
                         f"(this build reads version {expected})")
        self.found = found
        self.expected = expected


def _version() -> str:
    from . import __version__
    return __version__


def to_snapshot(model: Model, metadata: dict | None = None) -> dict:
    if model.algorithm not in REGISTRY:
        raise SnapshotError(f"no snapshot support for algorithm {model.algorithm!r}")
    if getattr(model, "schema", None) is None:
        raise SnapshotError("model has no schema; batch models must be fit first")
    meta = {"library": "afdm", "library_version": _version()}
    meta.update(metadata or {})
    return {
        "format_version": FORMAT_VERSION,
        "algorithm": model.algorithm,
        "schema": model.schema.to_dict(),
        "n_seen": int(model.n_seen),
        "params": model.params(),
        "state": model.get_state(),
        "metadata": meta,
    }


def dumps(snapshot: dict) -> str:
    """Canonical JSON text for a snapshot dict."""
    try:
        return json.dumps(snapshot, sort_keys=True, separators=(",", ":"),
                          allow_nan=False) + "\n"
    except ValueError as err:
        raise SnapshotError(f"snapshot holds a non-finite number: {err}") from None


def from_snapshot(snapshot: dict, schema: DatasetSchema | None = None) -> Model:
    """Rebuild a model, checking the version and (when given) the expected schema first."""
    if not isinstance(snapshot, dict):
        raise SnapshotError("snapshot must be a JSON object")
    version = snapshot.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(version)
    missing = [k for k in _KEYS if k not in snapshot]
    if missing:
        raise SnapshotError(f"snapshot is missing fields {missing}")
    tag = snapshot["algorithm"]
    cls = REGISTRY.get(tag)
    if cls is None:
        raise SnapshotError(f"unknown algorithm tag {tag!r}")
    try:
        stored = DatasetSchema.from_dict(snapshot["schema"])
    except (KeyError, TypeError, ValueError) as err:
        raise SnapshotError(f"snapshot schema is malformed: {err}") from None
    if schema is not None and stored != schema:
        raise SchemaError("snapshot schema does not match the data schema")
    params, state = snapshot["params"], snapshot["state"]
    try:
        if issubclass(cls, _ENSEMBLES):
            base_tag = params["base"]["algorithm"]
            base_cls = REGISTRY.get(base_tag)
            if base_cls is None or base_cls in _ENSEMBLES:
                raise SnapshotError(f"unknown ensemble member tag {base_tag!r}")
            model = cls.from_state(stored, params, state, base_cls=base_cls)
        else:
            model = cls.from_state(stored, params, state)
    except SnapshotError:
        raise
    except (KeyError, IndexError, TypeError, ValueError) as err:
        raise SnapshotError(f"snapshot state is corrupt: {err!r}") from None
    if isinstance(model, BatchModel):
        model.n_seen = int(snapshot["n_seen"])
    elif model.n_seen != snapshot["n_seen"]:
        raise SnapshotError(f"snapshot n_seen {snapshot['n_seen']} disagrees with "
                            f"restored state ({model.n_seen})")
    return model


def loads(text: str, schema: DatasetSchema | None = None) -> Model:
    try:
        snap = json.loads(text)
    except json.JSONDecodeError as err:
        raise SnapshotError(f"snapshot is not valid JSON: {err}") from None
    return from_snapshot(snap, schema)


def save(model: Model, path: str | os.PathLike, metadata: dict | None = None) -> None:
    text = dumps(to_snapshot(model, metadata))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def restore(path: str | os.PathLike, schema: DatasetSchema | None = None) -> Model:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), schema)
