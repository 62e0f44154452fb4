"""Density-weighted class entropy, entropy imbalance and Gini impurity.

The entropy imbalance of a labeled point cloud is the gap between the most
entropic class and the mean class entropy, where each class's entropy is a
Shannon entropy over density weights derived from K-nearest intraclass
neighbor distances. A classifier's entropy imbalance gain (EIG) is the drop
in imbalance when points are re-represented by the classifier's per-class
score vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyClass, EmptyPartition, NoClasses

DIST_EPS = 1e-9  # distances clamped here before inversion
DEFAULT_K = 5


def local_density(x: np.ndarray, class_members: np.ndarray, k: int) -> float:
    """Mean inverse distance to the min(k, n) nearest same-class members.

    ``class_members`` must not contain ``x`` itself. Empty neighborhoods
    yield density 0.
    """
    if class_members.shape[0] == 0:
        return 0.0
    dists = np.linalg.norm(class_members - x, axis=1)
    dists = np.maximum(dists, DIST_EPS)
    kk = min(int(k), dists.size)
    nearest = np.sort(dists)[:kk]
    return float(np.mean(1.0 / nearest))


def class_entropy(members: list[tuple[str, np.ndarray]], k: int) -> tuple[float, dict[str, float]]:
    """Entropy (bits) of one class's density weights.

    Returns (theta, gamma) where gamma maps instance id to its normalized
    density. A singleton class has gamma {x: 1} and theta 0.
    """
    if not members:
        raise EmptyClass("class_entropy requires a non-empty class")
    points = np.stack([vec for _, vec in members])
    n = points.shape[0]
    lam = np.zeros(n)
    for i in range(n):
        others = np.delete(points, i, axis=0)
        lam[i] = local_density(points[i], others, k)
    total = lam.sum()
    if total <= 0.0:
        gamma = np.full(n, 1.0 / n)
    else:
        gamma = lam / total
    nz = gamma[gamma > 0]
    theta = float(-(nz * np.log2(nz)).sum())
    return theta, {ident: float(g) for (ident, _), g in zip(members, gamma)}


@dataclass
class RepresentationView:
    """Labeled point cloud over which entropy imbalance is computed."""

    points: list[tuple[str, np.ndarray]]
    labels: dict[str, str]

    def by_class(self) -> dict[str, list[tuple[str, np.ndarray]]]:
        groups: dict[str, list[tuple[str, np.ndarray]]] = {}
        for ident, vec in self.points:
            groups.setdefault(self.labels[ident], []).append((ident, vec))
        return groups


def entropy_imbalance(view: RepresentationView, k: int) -> float:
    """max over classes of theta minus the unweighted mean theta; >= 0."""
    groups = view.by_class()
    if not groups:
        raise NoClasses("entropy imbalance needs at least one non-empty class")
    thetas = [class_entropy(members, k)[0] for members in groups.values()]
    return float(max(thetas) - np.mean(thetas))


def per_class_entropies(view: RepresentationView, k: int) -> dict[str, float]:
    return {label: class_entropy(members, k)[0] for label, members in view.by_class().items()}


@dataclass(frozen=True)
class EIGReport:
    classifier_id: str
    eta_raw: float
    eta_model: float
    eig: float
    class_entropies: dict[str, float]

    def to_json(self) -> dict:
        return {
            "classifier_id": self.classifier_id,
            "eta_raw": self.eta_raw,
            "eta_model": self.eta_model,
            "eig": self.eig,
            "class_entropies": dict(self.class_entropies),
        }


def raw_view(dataset) -> RepresentationView:
    """Feature-space view of a labeled dataset."""
    points = [(inst.id, inst.vector(dataset.schema)) for inst in dataset]
    labels = {inst.id: inst.label for inst in dataset}
    return RepresentationView(points=points, labels=labels)


def score_view(classifier, dataset) -> RepresentationView:
    """View of a dataset in the classifier's per-class score space.

    Score vectors are laid out in sorted label order so the representation
    is independent of dict iteration order.
    """
    points = []
    for inst in dataset:
        pred = classifier.predict(inst)
        order = sorted(pred.scores)
        points.append((inst.id, np.array([pred.scores[c] for c in order])))
    labels = {inst.id: inst.label for inst in dataset}
    return RepresentationView(points=points, labels=labels)


def eig(classifier, dataset, k: int = DEFAULT_K) -> EIGReport:
    """Entropy imbalance gain of a classifier's score representation.

    eta_raw is measured on raw feature vectors, eta_model on the
    classifier's score vectors; classes are the dataset's true labels in
    both views.
    """
    rv = raw_view(dataset)
    mv = score_view(classifier, dataset)
    eta_r = entropy_imbalance(rv, k)
    eta_m = entropy_imbalance(mv, k)
    return EIGReport(
        classifier_id=getattr(classifier, "id", "<anonymous>"),
        eta_raw=eta_r,
        eta_model=eta_m,
        eig=eta_r - eta_m,
        class_entropies=per_class_entropies(mv, k),
    )


def gini(labels) -> float:
    """Gini impurity 1 - sum p_i^2 of a label multiset."""
    labels = list(labels)
    if not labels:
        raise EmptyPartition("gini of an empty partition is undefined")
    _, counts = np.unique(np.array(labels, dtype=object), return_counts=True)
    p = counts / counts.sum()
    return float(1.0 - np.sum(p * p))
