"""Classic SMOTE oversampling for the rare class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Instance
from .errors import TooFewSamples


@dataclass
class SmoteConfig:
    k_neighbors: int = 5
    target: int | str = "balance-to-majority"
    seed: int = 0


def smote(minority: np.ndarray, n_synthetic: int, config: SmoteConfig) -> np.ndarray:
    """Generate synthetic minority points by segment interpolation.

    Each synthetic point is x + u * (x_nn - x) for a uniform u in [0, 1]
    and x_nn one of x's k nearest minority neighbors. Deterministic under
    config.seed. k is clamped to |minority| - 1 when too large.
    """
    minority = np.asarray(minority, dtype=float)
    if minority.shape[0] < 2:
        raise TooFewSamples("SMOTE needs at least 2 minority samples")
    n = minority.shape[0]
    k = min(config.k_neighbors, n - 1)
    rng = np.random.default_rng(config.seed)

    # full pairwise distances; desk scale
    diffs = minority[:, None, :] - minority[None, :, :]
    dists = np.linalg.norm(diffs, axis=2)
    np.fill_diagonal(dists, np.inf)
    neighbor_idx = np.argsort(dists, axis=1, kind="stable")[:, :k]

    out = np.empty((n_synthetic, minority.shape[1]))
    for i in range(n_synthetic):
        base = int(rng.integers(0, n))
        nn = int(neighbor_idx[base, int(rng.integers(0, k))])
        u = float(rng.uniform())
        out[i] = minority[base] + u * (minority[nn] - minority[base])
    return out


def oversample_dataset(dataset: Dataset, minority_label: str, config: SmoteConfig) -> Dataset:
    """Return a dataset with synthetic minority instances appended.

    Target ``"balance-to-majority"`` matches the largest class count;
    an integer target requests that many synthetic points.
    """
    counts: dict[str, int] = {}
    for inst in dataset:
        if inst.label is not None:
            counts[inst.label] = counts.get(inst.label, 0) + 1
    if minority_label not in counts:
        raise TooFewSamples(f"no instances labeled {minority_label!r}")
    if config.target == "balance-to-majority":
        n_synthetic = max(counts.values()) - counts[minority_label]
    else:
        n_synthetic = int(config.target)
    if n_synthetic <= 0:
        return dataset
    minority = [inst for inst in dataset if inst.label == minority_label]
    points = np.stack([inst.vector(dataset.schema) for inst in minority])
    synthetic = smote(points, n_synthetic, config)
    domain = minority[0].domain
    new_instances = list(dataset.instances)
    for i, vec in enumerate(synthetic):
        new_instances.append(
            Instance(
                id=f"smote_{minority_label}_{i}",
                domain=domain,
                label=minority_label,
                features={c: float(v) for c, v in zip(dataset.schema, vec)},
            )
        )
    return dataset.subset(new_instances)
