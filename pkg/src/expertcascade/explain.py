"""Structured per-instance explanation records.

The record captures the routing path through the cascade and, at every
knowledge (rule-based) node, the full per-proposition contribution ledger
(w_i, s_i, w_i*s_i) behind each class score. This is the hand-off document
for any downstream natural-language layer.
"""

from __future__ import annotations

from . import engine
from .cascade import CascadeNode, CascadeTree, FusionConfig, fuse, tree_scores
from .data import Instance
from .jsonutil import canonical_dumps


def explain(
    tree: CascadeTree,
    instance: Instance,
    fusion: FusionConfig | None = None,
    neural_scores: dict[str, float] | None = None,
) -> dict:
    path_entries = []
    knowledge_nodes = []
    node = tree.root
    while isinstance(node, CascadeNode):
        pred = node.classifier.predict(instance)
        path_entries.append(
            {
                "node_id": node.node_id,
                "classifier_id": node.classifier.id,
                "kind": node.classifier.spec.kind,
                "predicted": pred.label,
                "confidence": pred.confidence,
                "scores": dict(pred.scores),
            }
        )
        if node.classifier.spec.kind == "rule":
            ruleset = node.classifier.state["ruleset"]
            mode = node.classifier.state["mode"]
            scores = engine.rule_scores(ruleset, instance, mode)
            knowledge_nodes.append(
                {
                    "node_id": node.node_id,
                    "classifier_id": node.classifier.id,
                    "mode": mode,
                    "class_scores": {
                        c: {
                            "score": cs.score,
                            "ledger": [
                                {
                                    "proposition": k.proposition,
                                    "weight": k.weight,
                                    "satisfaction": k.satisfaction,
                                    "product": k.product,
                                }
                                for k in cs.contributions
                            ],
                        }
                        for c, cs in scores.items()
                    },
                }
            )
        node = node.children[pred.label]
    record = {
        "instance_id": instance.id,
        "y_final": node.label,
        "path": path_entries,
        "knowledge_nodes": knowledge_nodes,
    }
    if fusion is not None and neural_scores is not None:
        symbolic = tree_scores(tree, instance)
        fused = fuse(symbolic, neural_scores, fusion)
        y_fused = min(fused, key=lambda c: (-fused[c], c))
        record["fusion"] = {
            "mode": fusion.mode,
            "alpha": 0.5 if fusion.mode == "unweighted" else fusion.alpha,
            "symbolic": symbolic,
            "neural": dict(neural_scores),
            "fused": fused,
            "y_fused": y_fused,
        }
        record["y_final"] = y_fused
    return record


def explanation_json(record: dict) -> str:
    return canonical_dumps(record) + "\n"
