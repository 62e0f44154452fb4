"""Knowledge-guided cascade of experts.

Builds a decision tree whose internal nodes are pool classifiers. At each
node every pool member is trained on the current sample set and scored by
its entropy imbalance gain (EIG); the winner splits the samples by
predicted label. The branch carrying the rare class either cascades into a
deeper node (when its Gini impurity stays above a threshold) or terminates.
Near-ties in EIG are arbitrated by mean prediction confidence against a
dependability threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import metrics as im
from .data import Dataset, Instance
from .errors import (
    FingerprintMismatch,
    LabelSetMismatch,
    PoolEmpty,
    RareClassAbsent,
    SchemaMismatch,
    VersionMismatch,
)
from .evaluate import evaluate_predictions
from .jsonutil import canonical_dumps
from .metrics import EIGReport, gini
from .pool import REST_LABEL, Pool, Prediction, TrainedClassifier, partition_by_prediction, train

TREE_FORMAT_VERSION = 1


@dataclass
class CascadeConfig:
    rare_class: str
    tau_m: float = 0.05          # EIG tie margin
    tau_g: float = 0.2           # Gini threshold triggering a deeper cascade
    d_th: float = 0.5            # dependability threshold for tie arbitration
    k: int = 5                   # neighbor count for density entropies
    max_depth: int = 8
    eps_stop: float = 0.005      # min validation macro-F1 improvement per node
    min_samples: int | None = None  # defaults to 2k + 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.min_samples is None:
            self.min_samples = 2 * self.k + 2
        if not (0.0 <= self.tau_g < 1.0):
            raise ValueError("tau_g must lie in [0, 1)")
        if not (0.0 <= self.d_th <= 1.0):
            raise ValueError("d_th must lie in [0, 1]")
        if self.tau_m < 0.0:
            raise ValueError("tau_m must be >= 0")

    def to_json(self) -> dict:
        return {
            "rare_class": self.rare_class,
            "tau_m": self.tau_m,
            "tau_g": self.tau_g,
            "d_th": self.d_th,
            "k": self.k,
            "max_depth": self.max_depth,
            "eps_stop": self.eps_stop,
            "min_samples": self.min_samples,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Leaf:
    label: str


@dataclass
class CascadeNode:
    node_id: int
    classifier: TrainedClassifier
    children: dict[str, "CascadeNode | Leaf"]
    eig_report: EIGReport
    gini_at_node: dict[str, float]
    depth: int


@dataclass
class CascadeTree:
    root: CascadeNode | Leaf
    config: CascadeConfig
    class_labels: list[str]                  # all training class labels
    pool_snapshot: list[dict] = field(default_factory=list)  # per-node {id, fingerprint}
    build_log: list[dict] = field(default_factory=list)


def _majority_label(dataset: Dataset) -> str:
    counts: dict[str, int] = {}
    for inst in dataset:
        counts[inst.label] = counts.get(inst.label, 0) + 1
    return min(counts, key=lambda c: (-counts[c], c))


def _mean_confidence(model: TrainedClassifier, dataset: Dataset) -> float:
    return sum(model.predict(inst).confidence for inst in dataset) / len(dataset)


@dataclass
class _PathStep:
    node_id: int
    classifier: TrainedClassifier
    eig_report: EIGReport
    gini_at_node: dict[str, float]
    leaf_children: dict[str, Leaf]
    recurse_key: str | None
    depth: int


def _assemble(path: list[_PathStep], tail: CascadeNode | Leaf) -> CascadeNode | Leaf:
    """Rebuild the (single-descent) tree from the root, attaching ``tail``
    under the deepest step's recursion key."""
    current = tail
    for step in reversed(path):
        children: dict[str, CascadeNode | Leaf] = dict(step.leaf_children)
        if step.recurse_key is not None:
            children[step.recurse_key] = current
        current = CascadeNode(
            node_id=step.node_id,
            classifier=step.classifier,
            children=children,
            eig_report=step.eig_report,
            gini_at_node=step.gini_at_node,
            depth=step.depth,
        )
    return current


def _select_classifier(
    reports: list[tuple[TrainedClassifier, EIGReport]],
    samples: Dataset,
    config: CascadeConfig,
    log_entry: dict,
) -> tuple[TrainedClassifier, EIGReport]:
    """argmax EIG with tie arbitration by mean confidence against d_th."""
    ordered = sorted(range(len(reports)), key=lambda i: (-reports[i][1].eig, i))
    best_i, runner_i = ordered[0], (ordered[1] if len(ordered) > 1 else None)
    log_entry["eig"] = {m.id: r.eig for m, r in reports}
    if runner_i is None or reports[best_i][1].eig - reports[runner_i][1].eig > config.tau_m:
        log_entry["tie"] = False
        return reports[best_i]
    best, runner = reports[best_i], reports[runner_i]
    conf_best = _mean_confidence(best[0], samples)
    conf_runner = _mean_confidence(runner[0], samples)
    log_entry["tie"] = True
    log_entry["tie_confidences"] = {best[0].id: conf_best, runner[0].id: conf_runner}
    best_ok = conf_best > config.d_th
    runner_ok = conf_runner > config.d_th
    if best_ok != runner_ok:
        chosen = best if best_ok else runner
        log_entry["tie_resolution"] = "dependability"
    else:
        # both or neither dependable: higher EIG, then registration order
        chosen = best
        log_entry["tie_resolution"] = "eig_then_order"
    return chosen


def _rare_group(label_set: tuple[str, ...], rare_class: str) -> str | None:
    """The label-set entry whose group contains the rare class."""
    if rare_class in label_set:
        return rare_class
    if REST_LABEL in label_set:
        return REST_LABEL
    return None


def build_cascade(
    pool: Pool, train_set: Dataset, validation: Dataset, config: CascadeConfig
) -> CascadeTree:
    if len(pool) == 0:
        raise PoolEmpty("cannot build a cascade from an empty pool")
    labels = train_set.class_labels()
    if config.rare_class not in labels:
        raise RareClassAbsent(f"rare class {config.rare_class!r} not in training data")

    build_log: list[dict] = []
    pool_snapshot: list[dict] = []
    path: list[_PathStep] = []
    next_id = 0
    samples = train_set
    depth = 0
    last_f1: float | None = None

    def stop_leaf(reason: str) -> Leaf:
        leaf = Leaf(_majority_label(samples))
        build_log.append({"event": "stop", "depth": depth, "reason": reason, "leaf": leaf.label})
        return leaf

    tail: CascadeNode | Leaf | None = None
    while True:
        if len(samples.class_labels()) < 2:
            tail = stop_leaf("single_class")
            break
        if depth >= config.max_depth:
            tail = stop_leaf("max_depth")
            break
        if len(samples) < config.min_samples:
            tail = stop_leaf("min_samples")
            break

        trained = [train(spec, samples) for spec in pool]
        reports = [(m, im.eig(m, samples, config.k)) for m in trained]
        entry: dict = {"event": "select", "depth": depth, "samples": len(samples)}
        selected, report = _select_classifier(reports, samples, config, entry)
        no_progress = depth == 0 and max(r.eig for _, r in reports) <= 0.0
        if no_progress:
            entry["no_progress"] = True
        entry["selected"] = selected.id
        build_log.append(entry)

        partitions = partition_by_prediction(selected, samples)
        gini_map = {g: gini(part.labels) for g, part in partitions.items()}
        majority = _majority_label(samples)
        leaf_children: dict[str, Leaf] = {}
        for g in selected.label_set:
            if g in partitions:
                leaf_children[g] = Leaf(_majority_label(partitions[g]))
            else:
                leaf_children[g] = Leaf(g if g in labels else majority)

        step = _PathStep(
            node_id=next_id,
            classifier=selected,
            eig_report=report,
            gini_at_node=gini_map,
            leaf_children=leaf_children,
            recurse_key=None,
            depth=depth,
        )
        next_id += 1

        # validation gate: the node must buy a macro-F1 improvement
        tentative_root = _assemble(path + [step], Leaf(majority))  # recurse_key None: tail unused
        val_report = evaluate_predictions(
            validation, lambda i: infer_root(tentative_root, i)[0], per_domain=False
        )
        f1 = val_report.macro_f1
        if last_f1 is not None and f1 - last_f1 < config.eps_stop:
            build_log.pop()  # drop the rejected selection entry
            tail = stop_leaf("no_f1_improvement")
            break
        last_f1 = f1
        build_log.append({"event": "accept", "depth": depth, "node": step.node_id,
                          "classifier": selected.id, "val_macro_f1": f1})
        pool_snapshot.append({"id": selected.id, "fingerprint": selected.fingerprint})

        if no_progress:
            path.append(step)
            tail = None
            build_log.append({"event": "stop", "depth": depth, "reason": "no_progress"})
            break

        group = _rare_group(selected.label_set, config.rare_class)
        if group is None:
            path.append(step)
            tail = None
            build_log.append(
                {"event": "stop", "depth": depth, "reason": "rare_class_unreachable"}
            )
            break

        rare_part = partitions.get(group)
        if config.rare_class in selected.label_set:
            rare_gini = gini_map.get(group)
            build_log.append(
                {"event": "gini_check", "depth": depth, "partition": group,
                 "gini": rare_gini, "tau_g": config.tau_g}
            )
            if rare_part is None or rare_gini <= config.tau_g:
                path.append(step)
                tail = None
                build_log.append({"event": "stop", "depth": depth, "reason": "gini_below_tau_g"})
                break
            step.recurse_key = group
            path.append(step)
            samples = rare_part
            depth += 1
            build_log.append({"event": "cascade", "depth": depth, "into": group,
                              "samples": len(samples)})
            continue

        # rare class hides inside a broader group: descend into it
        if rare_part is None or config.rare_class not in rare_part.class_labels():
            path.append(step)
            tail = None
            build_log.append(
                {"event": "stop", "depth": depth, "reason": "rare_class_not_routed"}
            )
            break
        step.recurse_key = group
        path.append(step)
        samples = rare_part
        depth += 1
        build_log.append({"event": "descend", "depth": depth, "into": group,
                          "samples": len(samples)})

    root = _assemble(path, tail) if tail is not None else _assemble(path, Leaf("__unused__"))
    return CascadeTree(
        root=root,
        config=config,
        class_labels=labels,
        pool_snapshot=pool_snapshot,
        build_log=build_log,
    )


# --- inference ----------------------------------------------------------------

def infer_root(
    root: CascadeNode | Leaf, instance: Instance
) -> tuple[str, list[tuple[int, Prediction]]]:
    path: list[tuple[int, Prediction]] = []
    node = root
    while isinstance(node, CascadeNode):
        pred = node.classifier.predict(instance)
        path.append((node.node_id, pred))
        node = node.children[pred.label]
    return node.label, path


def infer(tree: CascadeTree, instance: Instance) -> tuple[str, list[tuple[int, Prediction]]]:
    """Route an instance through the tree; returns (final label, path)."""
    return infer_root(tree.root, instance)


def tree_scores(tree: CascadeTree, instance: Instance) -> dict[str, float]:
    """Score vector over all class labels for fusion purposes.

    When the final internal node scores the full label set, its scores are
    used directly; otherwise the final label gets the routing confidence
    and the remainder spreads uniformly.
    """
    y_final, path = infer(tree, instance)
    labels = tree.class_labels
    if path:
        node_id, pred = path[-1]
        if set(pred.scores) == set(labels):
            return dict(pred.scores)
        confidence = pred.confidence
    else:
        confidence = 1.0
    rest = (1.0 - confidence) / (len(labels) - 1) if len(labels) > 1 else 0.0
    return {c: (confidence if c == y_final else rest) for c in labels}


# --- fusion --------------------------------------------------------------------

@dataclass
class FusionConfig:
    mode: str = "unweighted"        # unweighted | weighted
    alpha: float | None = None      # weight on the neural vector

    def __post_init__(self) -> None:
        if self.mode not in ("unweighted", "weighted"):
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        if self.alpha is not None and not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")


def fuse(
    symbolic: dict[str, float], neural: dict[str, float], config: FusionConfig
) -> dict[str, float]:
    if set(symbolic) != set(neural):
        raise LabelSetMismatch(
            f"symbolic labels {sorted(symbolic)} != neural labels {sorted(neural)}"
        )
    if config.mode == "unweighted":
        alpha = 0.5
    else:
        if config.alpha is None:
            raise ValueError("weighted fusion requires alpha (fit it or supply it)")
        alpha = config.alpha
    # endpoints return the inputs bit-for-bit
    if alpha == 0.0:
        return dict(symbolic)
    if alpha == 1.0:
        return dict(neural)
    fused = {c: alpha * neural[c] + (1.0 - alpha) * symbolic[c] for c in symbolic}
    total = sum(fused.values())
    if total > 0:
        fused = {c: v / total for c, v in fused.items()}
    return fused


ALPHA_GRID = [round(0.05 * i, 2) for i in range(21)]


def fit_fusion_alpha(
    symbolic: list[dict[str, float]],
    neural: list[dict[str, float]],
    true_labels: list[str],
) -> float:
    """Grid-search alpha maximizing macro-F1 of the fused argmax; ties take
    the smaller alpha."""
    from .evaluate import metrics_from_pairs

    best_alpha, best_f1 = 0.0, -1.0
    for alpha in ALPHA_GRID:
        cfg = FusionConfig(mode="weighted", alpha=alpha)
        pairs = []
        for s, n, t in zip(symbolic, neural, true_labels):
            fused = fuse(s, n, cfg)
            pred = min(fused, key=lambda c: (-fused[c], c))
            pairs.append((t, pred))
        f1 = metrics_from_pairs(pairs).macro_f1
        if f1 > best_f1:
            best_alpha, best_f1 = alpha, f1
    return best_alpha


# --- serialization ---------------------------------------------------------------

def _node_to_json(node: CascadeNode | Leaf) -> dict:
    if isinstance(node, Leaf):
        return {"type": "leaf", "label": node.label}
    return {
        "type": "node",
        "id": node.node_id,
        "depth": node.depth,
        "classifier": node.classifier.to_json(),
        "fingerprint": node.classifier.fingerprint,
        "eig_report": node.eig_report.to_json(),
        "gini": dict(node.gini_at_node),
        "children": {key: _node_to_json(child) for key, child in node.children.items()},
    }


def export_tree(tree: CascadeTree) -> str:
    """Canonical JSON text; identical trees export byte-identically."""
    doc = {
        "version": TREE_FORMAT_VERSION,
        "config": tree.config.to_json(),
        "class_labels": list(tree.class_labels),
        "pool_snapshot": list(tree.pool_snapshot),
        "build_log": list(tree.build_log),
        "root": _node_to_json(tree.root),
    }
    return canonical_dumps(doc) + "\n"


def _node_from_json(doc: dict) -> CascadeNode | Leaf:
    if doc["type"] == "leaf":
        return Leaf(doc["label"])
    classifier = TrainedClassifier.from_json(doc["classifier"])
    if classifier.fingerprint != doc["fingerprint"]:
        raise FingerprintMismatch(
            f"node {doc['id']}: stored fingerprint does not match reconstructed state"
        )
    report = EIGReport(
        classifier_id=doc["eig_report"]["classifier_id"],
        eta_raw=doc["eig_report"]["eta_raw"],
        eta_model=doc["eig_report"]["eta_model"],
        eig=doc["eig_report"]["eig"],
        class_entropies=dict(doc["eig_report"]["class_entropies"]),
    )
    return CascadeNode(
        node_id=doc["id"],
        classifier=classifier,
        children={key: _node_from_json(child) for key, child in doc["children"].items()},
        eig_report=report,
        gini_at_node=dict(doc["gini"]),
        depth=doc["depth"],
    )


def import_tree(text: str, pool: Pool | None = None) -> CascadeTree:
    import json

    doc = json.loads(text)
    if doc.get("version") != TREE_FORMAT_VERSION:
        raise VersionMismatch(f"unsupported tree format version {doc.get('version')!r}")
    if pool is not None:
        pool_ids = {spec.id for spec in pool}
        for entry in doc["pool_snapshot"]:
            if entry["id"] not in pool_ids:
                raise FingerprintMismatch(
                    f"tree references classifier {entry['id']!r} absent from the pool"
                )
    cfg = CascadeConfig(**doc["config"])
    return CascadeTree(
        root=_node_from_json(doc["root"]),
        config=cfg,
        class_labels=list(doc["class_labels"]),
        pool_snapshot=list(doc["pool_snapshot"]),
        build_log=list(doc["build_log"]),
    )
