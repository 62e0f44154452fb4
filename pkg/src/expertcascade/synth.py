"""Synthetic benchmark generation: imbalanced Gaussian mixtures with a
rare class defined by an explicit threshold conjunction, plus per-domain
affine shifts. Stands in for clinical data in tests and demos.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Instance
from .errors import InvalidConfig

_OPS = {
    "<": lambda x, v: x < v,
    "<=": lambda x, v: x <= v,
    ">": lambda x, v: x > v,
    ">=": lambda x, v: x >= v,
}


@dataclass
class ThresholdCondition:
    feature: str
    op: str
    value: float

    def holds(self, features: dict[str, float]) -> bool:
        return _OPS[self.op](features[self.feature], self.value)


@dataclass
class ClassModel:
    prior: float
    components: list[dict]  # each: mean, std, optional weight


@dataclass
class SynthConfig:
    seed: int
    features: list[str]
    classes: dict[str, ClassModel]
    rare_class: str | None = None
    rare_rule: list[ThresholdCondition] = field(default_factory=list)
    domains: dict[str, dict] = field(default_factory=lambda: {"source": {}})
    splits: dict[str, dict] = field(default_factory=dict)

    def validate(self) -> None:
        total = sum(cm.prior for cm in self.classes.values())
        if abs(total - 1.0) > 1e-9:
            raise InvalidConfig(f"class priors must sum to 1, got {total}")
        if self.rare_class is not None and self.rare_class not in self.classes:
            raise InvalidConfig(f"rare class {self.rare_class!r} not among classes")
        d = len(self.features)
        for label, cm in self.classes.items():
            for comp in cm.components:
                if len(comp["mean"]) != d or len(comp["std"]) != d:
                    raise InvalidConfig(f"component dims for class {label!r} must match features")
        for name, dom in self.domains.items():
            a = dom.get("a", [1.0] * d)
            if any(ai == 0 for ai in a):
                raise InvalidConfig(f"domain {name!r} has a zero scale coefficient")
        for cond in self.rare_rule:
            if cond.feature not in self.features:
                raise InvalidConfig(f"rare rule references unknown feature {cond.feature!r}")
            if cond.op not in _OPS:
                raise InvalidConfig(f"unknown comparison {cond.op!r}")


def load_synth_config(path) -> SynthConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return synth_config_from_json(doc)


def synth_config_from_json(doc: dict) -> SynthConfig:
    try:
        classes = {
            label: ClassModel(prior=spec["prior"], components=spec["components"])
            for label, spec in doc["classes"].items()
        }
        cfg = SynthConfig(
            seed=int(doc.get("seed", 0)),
            features=list(doc["features"]),
            classes=classes,
            rare_class=doc.get("rare_class"),
            rare_rule=[ThresholdCondition(**c) for c in doc.get("rare_rule", [])],
            domains=doc.get("domains", {"source": {}}),
            splits=doc.get("splits", {}),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidConfig(f"malformed synth config: {exc}") from exc
    cfg.validate()
    return cfg


def _stratified_counts(priors: dict[str, float], n: int) -> dict[str, int]:
    """Exact per-class counts by largest remainder."""
    raw = {c: priors[c] * n for c in sorted(priors)}
    counts = {c: int(raw[c]) for c in raw}
    short = n - sum(counts.values())
    by_frac = sorted(raw, key=lambda c: (-(raw[c] - counts[c]), c))
    for c in by_frac[:short]:
        counts[c] += 1
    return counts


def _sample_class(label: str, cm: ClassModel, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    weights = np.array([comp.get("weight", 1.0) for comp in cm.components], dtype=float)
    weights /= weights.sum()
    idx = rng.choice(len(cm.components), p=weights)
    comp = cm.components[idx]
    x = rng.normal(np.asarray(comp["mean"], float), np.asarray(comp["std"], float))
    if label == cfg.rare_class and cfg.rare_rule:
        # rejection-sample so rare instances satisfy the rule by construction
        for _ in range(10_000):
            feats = dict(zip(cfg.features, x))
            if all(cond.holds(feats) for cond in cfg.rare_rule):
                return x
            x = rng.normal(np.asarray(comp["mean"], float), np.asarray(comp["std"], float))
        raise InvalidConfig(
            f"rare class {label!r} mixture nearly never satisfies the rare rule"
        )
    return x


def synth_generate(cfg: SynthConfig) -> dict[str, Dataset]:
    """Generate one Dataset per configured split, deterministic under seed."""
    cfg.validate()
    priors = {label: cm.prior for label, cm in cfg.classes.items()}
    out: dict[str, Dataset] = {}
    for split_idx, split_name in enumerate(sorted(cfg.splits)):
        split = cfg.splits[split_name]
        domain = split.get("domain", "source")
        if domain not in cfg.domains:
            raise InvalidConfig(f"split {split_name!r} references unknown domain {domain!r}")
        n = int(split["n"])
        dom = cfg.domains[domain]
        a = np.asarray(dom.get("a", [1.0] * len(cfg.features)), float)
        b = np.asarray(dom.get("b", [0.0] * len(cfg.features)), float)
        rng = np.random.default_rng([cfg.seed, split_idx])
        counts = _stratified_counts(priors, n)
        instances = []
        serial = 0
        for label in sorted(counts):
            cm = cfg.classes[label]
            for _ in range(counts[label]):
                x = _sample_class(label, cm, cfg, rng)
                shifted = a * x + b
                instances.append(
                    Instance(
                        id=f"{split_name}_{serial:05d}",
                        domain=domain,
                        label=label,
                        features={c: float(v) for c, v in zip(cfg.features, shifted)},
                    )
                )
                serial += 1
        out[split_name] = Dataset(instances=instances, schema=tuple(cfg.features))
    return out
