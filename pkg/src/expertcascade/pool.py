"""Uniform pool of heterogeneous classifiers.

Four kinds share one train/predict surface:

* ``rule``: the knowledge-driven classifier backed by a RuleSet
* ``knn``: K-nearest-neighbor voting
* ``logistic``: fixed-iteration multinomial logistic regression
* ``external``: precomputed per-instance score files (the adapter through
  which externally trained models participate)

A classifier's ``label_set`` may name label groups for one-vs-rest use
(e.g. ``{"grade3", "rest"}``); training maps labels outside the set to
``"rest"``.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import engine
from .data import Dataset, Instance
from .dsl import RuleSet, format_ruleset, parse_ruleset
from .errors import (
    DuplicateId,
    EmptyPartition,
    ExternalScoreMissing,
    SchemaMismatch,
    UnknownInstance,
)
from .jsonutil import canonical_dumps

REST_LABEL = "rest"

LOGISTIC_ITERATIONS = 500
LOGISTIC_STEP = 0.1


@dataclass(frozen=True)
class Prediction:
    label: str
    confidence: float
    scores: dict[str, float]


@dataclass
class ClassifierSpec:
    id: str
    kind: str                      # rule | knn | logistic | external
    label_set: tuple[str, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.label_set = tuple(sorted(set(self.label_set)))
        if len(self.label_set) < 2:
            raise ValueError(f"classifier {self.id!r} needs at least 2 labels")
        if self.kind not in ("rule", "knn", "logistic", "external"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")

    def map_label(self, label: str) -> str:
        if label in self.label_set:
            return label
        if REST_LABEL in self.label_set:
            return REST_LABEL
        raise SchemaMismatch(
            f"label {label!r} outside label set of {self.id!r} and no 'rest' group"
        )


def _argmax_label(scores: dict[str, float]) -> str:
    return min(scores, key=lambda c: (-scores[c], c))


def _normalized(scores: dict[str, float]) -> dict[str, float]:
    total = sum(scores.values())
    if total <= 0:
        return {c: 1.0 / len(scores) for c in scores}
    return {c: v / total for c, v in scores.items()}


def _partition_hash(partition: Dataset) -> str:
    doc = [
        [inst.id, inst.domain, inst.label, [inst.features[c] for c in partition.schema]]
        for inst in partition
    ]
    return hashlib.sha256(canonical_dumps([list(partition.schema), doc]).encode()).hexdigest()


class TrainedClassifier:
    """A fitted pool member; immutable after construction."""

    def __init__(self, spec: ClassifierSpec, state: dict):
        self.spec = spec
        self.state = state
        self.fingerprint = hashlib.sha256(
            canonical_dumps(self.to_json()["state"]).encode()
        ).hexdigest()

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def label_set(self) -> tuple[str, ...]:
        return self.spec.label_set

    def predict(self, instance: Instance) -> Prediction:
        kind = self.spec.kind
        if kind == "knn":
            scores = self._predict_knn(instance)
        elif kind == "logistic":
            scores = self._predict_logistic(instance)
        elif kind == "rule":
            scores = self._predict_rule(instance)
        else:
            scores = self._predict_external(instance)
        scores = _normalized(scores)
        label = _argmax_label(scores)
        return Prediction(label=label, confidence=scores[label], scores=scores)

    # --- per-kind prediction --------------------------------------------

    def _predict_knn(self, instance: Instance) -> dict[str, float]:
        x = instance.vector(tuple(self.state["schema"]))
        points = self.state["points"]
        dists = np.linalg.norm(points - x, axis=1)
        k = min(self.state["k"], dists.size)
        order = np.argsort(dists, kind="stable")[:k]
        votes = {c: 0.0 for c in self.label_set}
        for idx in order:
            votes[self.state["labels"][idx]] += 1.0
        return votes

    def _predict_logistic(self, instance: Instance) -> dict[str, float]:
        x = instance.vector(tuple(self.state["schema"]))
        z = (x - self.state["mean"]) / self.state["std"]
        logits = self.state["W"] @ z + self.state["b"]
        logits -= logits.max()
        p = np.exp(logits)
        p /= p.sum()
        return {c: float(v) for c, v in zip(self.state["classes"], p)}

    def _predict_rule(self, instance: Instance) -> dict[str, float]:
        _, _, scores = engine.rule_classifier_predict(
            self.state["ruleset"], instance, self.state["mode"]
        )
        return scores

    def _predict_external(self, instance: Instance) -> dict[str, float]:
        rows = self.state["rows"]
        if instance.id not in rows:
            raise UnknownInstance(instance.id)
        return {c: v for c, v in zip(self.state["labels"], rows[instance.id])}

    # --- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        kind = self.spec.kind
        if kind == "knn":
            state = {
                "k": self.state["k"],
                "schema": list(self.state["schema"]),
                "points": self.state["points"].tolist(),
                "labels": list(self.state["labels"]),
                "partition": self.state["partition"],
            }
        elif kind == "logistic":
            state = {
                "schema": list(self.state["schema"]),
                "classes": list(self.state["classes"]),
                "W": self.state["W"].tolist(),
                "b": self.state["b"].tolist(),
                "mean": self.state["mean"].tolist(),
                "std": self.state["std"].tolist(),
                "partition": self.state["partition"],
            }
        elif kind == "rule":
            state = {
                "ekr": format_ruleset(self.state["ruleset"]),
                "weights": {c: dict(w) for c, w in self.state["ruleset"].weights.items()},
                "mode": self.state["mode"],
                "partition": self.state["partition"],
            }
        else:
            state = {
                "labels": list(self.state["labels"]),
                "rows": {i: list(map(float, r)) for i, r in self.state["rows"].items()},
                "partition": self.state["partition"],
            }
        return {
            "id": self.spec.id,
            "kind": kind,
            "label_set": list(self.spec.label_set),
            "state": state,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TrainedClassifier":
        spec = ClassifierSpec(id=doc["id"], kind=doc["kind"], label_set=tuple(doc["label_set"]))
        s = doc["state"]
        kind = doc["kind"]
        if kind == "knn":
            state = {
                "k": s["k"],
                "schema": tuple(s["schema"]),
                "points": np.array(s["points"], dtype=float).reshape(len(s["labels"]), -1),
                "labels": list(s["labels"]),
                "partition": s["partition"],
            }
        elif kind == "logistic":
            state = {
                "schema": tuple(s["schema"]),
                "classes": list(s["classes"]),
                "W": np.array(s["W"], dtype=float),
                "b": np.array(s["b"], dtype=float),
                "mean": np.array(s["mean"], dtype=float),
                "std": np.array(s["std"], dtype=float),
                "partition": s["partition"],
            }
        elif kind == "rule":
            ruleset = parse_ruleset(s["ekr"])
            ruleset.weights = {c: dict(w) for c, w in s["weights"].items()}
            state = {"ruleset": ruleset, "mode": s["mode"], "partition": s["partition"]}
        else:
            state = {
                "labels": list(s["labels"]),
                "rows": {i: np.array(r, dtype=float) for i, r in s["rows"].items()},
                "partition": s["partition"],
            }
        return cls(spec, state)


def _mapped_labels(spec: ClassifierSpec, partition: Dataset) -> list[str]:
    return [spec.map_label(inst.label) for inst in partition]


def train(spec: ClassifierSpec, partition: Dataset) -> TrainedClassifier:
    if len(partition) == 0:
        raise EmptyPartition(f"cannot train {spec.id!r} on an empty partition")
    phash = _partition_hash(partition)
    if spec.kind == "knn":
        state = {
            "k": int(spec.params.get("k", 5)),
            "schema": partition.schema,
            "points": partition.feature_matrix(),
            "labels": _mapped_labels(spec, partition),
            "partition": phash,
        }
    elif spec.kind == "logistic":
        state = _train_logistic(spec, partition, phash)
    elif spec.kind == "rule":
        ruleset: RuleSet = spec.params["ruleset"]
        mode = spec.params.get("mode", "weighted_sum")
        restricted = ruleset.restricted(set(spec.label_set))
        mapped = partition.subset(
            [replace(inst, label=spec.map_label(inst.label)) for inst in partition]
        )
        fitted = engine.fit_weights(restricted, mapped)
        state = {"ruleset": fitted, "mode": mode, "partition": phash}
    else:
        state = _load_external(spec, partition, phash)
    return TrainedClassifier(spec, state)


def _train_logistic(spec: ClassifierSpec, partition: Dataset, phash: str) -> dict:
    X = partition.feature_matrix()
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    Z = (X - mean) / std
    classes = sorted(set(_mapped_labels(spec, partition)))
    class_index = {c: i for i, c in enumerate(classes)}
    y = np.array([class_index[spec.map_label(inst.label)] for inst in partition])
    n, d = Z.shape
    C = len(classes)
    W = np.zeros((C, d))
    b = np.zeros(C)
    onehot = np.zeros((n, C))
    onehot[np.arange(n), y] = 1.0
    iters = int(spec.params.get("iterations", LOGISTIC_ITERATIONS))
    step = float(spec.params.get("step", LOGISTIC_STEP))
    for _ in range(iters):
        logits = Z @ W.T + b
        logits -= logits.max(axis=1, keepdims=True)
        P = np.exp(logits)
        P /= P.sum(axis=1, keepdims=True)
        G = (P - onehot) / n
        W -= step * (G.T @ Z)
        b -= step * G.sum(axis=0)
    return {
        "schema": partition.schema,
        "classes": classes,
        "W": W,
        "b": b,
        "mean": mean,
        "std": std,
        "partition": phash,
    }


def load_score_file(path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Read an external score CSV (header ``id,<label1>,<label2>,...``)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        labels = header[1:]
        rows: dict[str, np.ndarray] = {}
        for row in reader:
            if not row:
                continue
            scores = np.array([float(v) for v in row[1:]], dtype=float)
            if np.any(scores < 0):
                raise ValueError(f"negative score for instance {row[0]!r}")
            rows[row[0]] = scores
    return labels, rows


def _load_external(spec: ClassifierSpec, partition: Dataset, phash: str) -> dict:
    labels, rows = load_score_file(spec.params["path"])
    if set(labels) != set(spec.label_set):
        raise SchemaMismatch(
            f"score file labels {labels} do not match label set {list(spec.label_set)}"
        )
    missing = [inst.id for inst in partition if inst.id not in rows]
    if missing:
        raise ExternalScoreMissing(missing)
    return {"labels": labels, "rows": rows, "partition": phash}


class Pool:
    """Ordered registry of classifier specs; order breaks selection ties."""

    def __init__(self):
        self.specs: list[ClassifierSpec] = []
        self._ids: set[str] = set()

    def register(self, spec: ClassifierSpec) -> "Pool":
        if spec.id in self._ids:
            raise DuplicateId(spec.id)
        self._ids.add(spec.id)
        self.specs.append(spec)
        return self

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)

    def order_of(self, ident: str) -> int:
        for i, spec in enumerate(self.specs):
            if spec.id == ident:
                return i
        raise KeyError(ident)


def partition_by_prediction(model: TrainedClassifier, dataset: Dataset) -> dict[str, Dataset]:
    """Split a dataset by predicted label; empty partitions are omitted."""
    buckets: dict[str, list[Instance]] = {}
    for inst in dataset:
        pred = model.predict(inst)
        buckets.setdefault(pred.label, []).append(inst)
    return {label: dataset.subset(members) for label, members in buckets.items()}
