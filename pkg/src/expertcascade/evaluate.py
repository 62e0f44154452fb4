"""Confusion-matrix metrics and per-domain evaluation reports."""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import Dataset
from .errors import UnlabeledData


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    absent: bool = False  # class missing from the data; F1 reported as 0


@dataclass
class MetricsReport:
    accuracy: float
    macro_f1: float
    per_class: dict[str, ClassMetrics]
    confusion: dict[str, dict[str, int]]   # true label -> predicted label -> count
    rare_class: str | None = None
    sensitivity: float | None = None       # recall of the rare class
    rare_f1: float | None = None
    per_domain: dict[str, "MetricsReport"] = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": {
                c: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "absent": m.absent,
                }
                for c, m in self.per_class.items()
            },
            "confusion": {t: dict(row) for t, row in self.confusion.items()},
        }
        if self.rare_class is not None:
            doc["rare_class"] = self.rare_class
            doc["sensitivity"] = self.sensitivity
            doc["rare_f1"] = self.rare_f1
        if self.per_domain:
            doc["per_domain"] = {d: r.to_json() for d, r in self.per_domain.items()}
        return doc


def metrics_from_pairs(
    pairs: list[tuple[str, str]], rare_class: str | None = None
) -> MetricsReport:
    """Build a MetricsReport from (true, predicted) label pairs."""
    if not pairs:
        raise UnlabeledData("no labeled instances to evaluate")
    labels = sorted({t for t, _ in pairs} | {p for _, p in pairs})
    confusion = {t: {p: 0 for p in labels} for t in labels}
    for t, p in pairs:
        confusion[t][p] += 1
    total = len(pairs)
    correct = sum(confusion[c][c] for c in labels)
    per_class: dict[str, ClassMetrics] = {}
    for c in labels:
        tp = confusion[c][c]
        support = sum(confusion[c].values())
        predicted = sum(confusion[t][c] for t in labels)
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[c] = ClassMetrics(
            precision=precision, recall=recall, f1=f1, support=support, absent=support == 0
        )
    macro_f1 = sum(m.f1 for m in per_class.values()) / len(per_class)
    report = MetricsReport(
        accuracy=correct / total,
        macro_f1=macro_f1,
        per_class=per_class,
        confusion=confusion,
    )
    if rare_class is not None:
        report.rare_class = rare_class
        rc = per_class.get(rare_class)
        report.sensitivity = rc.recall if rc else 0.0
        report.rare_f1 = rc.f1 if rc else 0.0
    return report


def evaluate_predictions(
    dataset: Dataset,
    predict_label,
    rare_class: str | None = None,
    per_domain: bool = True,
) -> MetricsReport:
    """Evaluate a label-prediction callable over a labeled dataset.

    ``predict_label(instance) -> str``. Raises UnlabeledData if any
    instance lacks a label.
    """
    pairs = []
    domain_pairs: dict[str, list[tuple[str, str]]] = {}
    for inst in dataset:
        if inst.label is None:
            raise UnlabeledData(f"instance {inst.id!r} has no label")
        pred = predict_label(inst)
        pairs.append((inst.label, pred))
        domain_pairs.setdefault(inst.domain, []).append((inst.label, pred))
    report = metrics_from_pairs(pairs, rare_class)
    if per_domain and len(domain_pairs) > 1:
        report.per_domain = {
            d: metrics_from_pairs(dp, rare_class) for d, dp in sorted(domain_pairs.items())
        }
    return report
