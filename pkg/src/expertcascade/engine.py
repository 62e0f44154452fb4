"""Proposition satisfaction, rule evaluation and the rule-based classifier.

Satisfactions s_i in [0,1] come from per-proposition extractors (hard
threshold or sigmoid). A class score is either a weighted sum of the
satisfactions of the propositions in that class's rule, or the fuzzy value
of the rule itself (Goedel min/max or product semantics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, Instance
from .dsl import And, Atom, Expr, ExtractorDecl, Not, Or, RuleSet, atoms_of
from .errors import EmptyDataset, MissingFeature, UnknownAtom, WeightsNotFitted

SatisfactionVector = dict[str, float]


def extract_satisfaction(decl: ExtractorDecl, instance: Instance) -> float:
    if decl.feature not in instance.features:
        raise MissingFeature(decl.feature)
    x = instance.features[decl.feature]
    if decl.kind == "threshold":
        ok = {
            "<": x < decl.value,
            "<=": x <= decl.value,
            ">": x > decl.value,
            ">=": x >= decl.value,
        }[decl.op]
        return 1.0 if ok else 0.0
    # sigmoid
    z = decl.direction * (x - decl.center) / decl.scale
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def satisfaction_vector(ruleset: RuleSet, instance: Instance) -> SatisfactionVector:
    """Evaluate every declared proposition, in declaration order."""
    return {name: extract_satisfaction(decl, instance) for name, decl in ruleset.extractors.items()}


def eval_expr(expr: Expr, sat: SatisfactionVector, semantics: str = "goedel") -> float:
    if semantics not in ("goedel", "product"):
        raise ValueError(f"unknown semantics {semantics!r}")
    if isinstance(expr, Atom):
        if expr.name not in sat:
            raise UnknownAtom(expr.name)
        return sat[expr.name]
    if isinstance(expr, Not):
        return 1.0 - eval_expr(expr.child, sat, semantics)
    a = eval_expr(expr.left, sat, semantics)
    b = eval_expr(expr.right, sat, semantics)
    if isinstance(expr, And):
        return min(a, b) if semantics == "goedel" else a * b
    if isinstance(expr, Or):
        return max(a, b) if semantics == "goedel" else a + b - a * b
    raise TypeError(f"not an expression node: {expr!r}")


@dataclass(frozen=True)
class Contribution:
    proposition: str
    weight: float
    satisfaction: float

    @property
    def product(self) -> float:
        return self.weight * self.satisfaction


@dataclass(frozen=True)
class ClassScore:
    class_label: str
    score: float
    contributions: tuple[Contribution, ...]


def class_score(
    ruleset: RuleSet,
    class_label: str,
    sat: SatisfactionVector,
    mode: str = "weighted_sum",
) -> ClassScore:
    props = ruleset.propositions_for(class_label)
    if mode == "weighted_sum":
        if class_label not in ruleset.weights:
            raise WeightsNotFitted(class_label)
        weights = ruleset.weights[class_label]
        contribs = tuple(Contribution(p, weights[p], sat[p]) for p in props)
        return ClassScore(class_label, sum(c.product for c in contribs), contribs)
    if mode == "fuzzy":
        score = eval_expr(ruleset.class_rules[class_label], sat, "goedel")
        w = 1.0 / len(props) if props else 0.0
        contribs = tuple(Contribution(p, w, sat[p]) for p in props)
        return ClassScore(class_label, score, contribs)
    raise ValueError(f"unknown scoring mode {mode!r}")


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = 1}."""
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - css) / np.arange(1, n + 1) > 0)[0][-1]
    theta = (1.0 - css[rho]) / (rho + 1)
    return np.maximum(v + theta, 0.0)


FIT_ITERATIONS = 500
FIT_STEP = 0.1


def fit_weights(ruleset: RuleSet, data: Dataset) -> RuleSet:
    """Fit per-class simplex weights by projected gradient descent.

    For each class c, minimizes mean squared error between the weighted
    satisfaction sum and the one-vs-rest indicator of c, starting from the
    uniform weight vector. Returns a new RuleSet; the input is untouched.
    """
    if len(data) == 0:
        raise EmptyDataset("cannot fit weights on an empty dataset")
    fitted = RuleSet(
        extractors=dict(ruleset.extractors),
        class_rules=dict(ruleset.class_rules),
    )
    sats = [satisfaction_vector(ruleset, inst) for inst in data]
    for class_label in ruleset.class_rules:
        props = ruleset.propositions_for(class_label)
        m = len(props)
        S = np.array([[sv[p] for p in props] for sv in sats])  # n x m
        t = np.array([1.0 if inst.label == class_label else 0.0 for inst in data])
        w = np.full(m, 1.0 / m)
        n = len(data)
        for _ in range(FIT_ITERATIONS):
            grad = (2.0 / n) * S.T @ (S @ w - t)
            w = _project_simplex(w - FIT_STEP * grad)
        fitted.weights[class_label] = {p: float(wi) for p, wi in zip(props, w)}
    return fitted


def rule_scores(
    ruleset: RuleSet, instance: Instance, mode: str = "weighted_sum"
) -> dict[str, ClassScore]:
    sat = satisfaction_vector(ruleset, instance)
    return {c: class_score(ruleset, c, sat, mode) for c in ruleset.class_rules}


def rule_classifier_predict(
    ruleset: RuleSet, instance: Instance, mode: str = "weighted_sum"
) -> tuple[str, float, dict[str, float]]:
    """Predict (label, confidence, normalized score vector) from class scores.

    Ties at the argmax break to the lexicographically smallest label; an
    all-zero score vector falls back to the uniform distribution.
    """
    scores = rule_scores(ruleset, instance, mode)
    raw = {c: cs.score for c, cs in scores.items()}
    total = sum(raw.values())
    if total > 0:
        norm = {c: v / total for c, v in raw.items()}
    else:
        norm = {c: 1.0 / len(raw) for c in raw}
    label = min(norm, key=lambda c: (-norm[c], c))
    return label, norm[label], norm
