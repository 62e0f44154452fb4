"""Command-line harness.

Subcommands: validate-rules, eig, build, eval, explain, synth. All JSON
output is canonical (sorted keys, fixed float format) so identical runs
produce byte-identical files. Exit codes: 0 success, 1 user error,
2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import cascade as cas
from . import dsl, synth
from .data import load_dataset, save_dataset
from .errors import ExpertCascadeError, UnlabeledData
from .evaluate import evaluate_predictions
from .explain import explain, explanation_json
from .jsonutil import canonical_dumps
from .metrics import eig as compute_eig
from .pool import ClassifierSpec, Pool, load_score_file, train
from .resample import SmoteConfig, oversample_dataset


def _load_pool(path) -> Pool:
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    pool = Pool()
    for entry in doc["classifiers"]:
        kind = entry["kind"]
        params: dict = {}
        if kind == "rule":
            rules_path = os.path.join(base, entry["rules"])
            params["ruleset"] = dsl.load_ruleset(rules_path)
            params["mode"] = entry.get("mode", "weighted_sum")
        elif kind == "knn":
            params["k"] = entry.get("k", 5)
        elif kind == "logistic":
            for key in ("iterations", "step", "seed"):
                if key in entry:
                    params[key] = entry[key]
        elif kind == "external":
            params["path"] = os.path.join(base, entry["scores"])
        pool.register(ClassifierSpec(id=entry["id"], kind=kind, label_set=tuple(entry["labels"]), params=params))
    return pool


def _cmd_validate_rules(args) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        text = fh.read()
    ruleset = dsl.parse_ruleset(text)
    print(
        f"ok: {len(ruleset.extractors)} proposition(s), {len(ruleset.class_rules)} class rule(s)"
    )
    return 0


def _cmd_eig(args) -> int:
    pool = _load_pool(args.pool)
    data = load_dataset(args.data)
    for spec in pool:
        model = train(spec, data)
        report = compute_eig(model, data, args.k)
        print(canonical_dumps(report.to_json()))
    return 0


def _parse_fusion(text: str | None) -> cas.FusionConfig | None:
    if text is None:
        return None
    if text == "unweighted":
        return cas.FusionConfig(mode="unweighted")
    if text.startswith("weighted"):
        alpha = None
        if ":" in text:
            alpha = float(text.split(":", 1)[1])
        return cas.FusionConfig(mode="weighted", alpha=alpha)
    raise ExpertCascadeError(f"unknown fusion mode {text!r}")


def _cmd_build(args) -> int:
    pool = _load_pool(args.pool)
    train_set = load_dataset(args.train)
    val_set = load_dataset(args.val)
    if args.smote:
        train_set = oversample_dataset(
            train_set, args.rare, SmoteConfig(k_neighbors=args.smote_k, seed=args.seed)
        )
    config = cas.CascadeConfig(
        rare_class=args.rare,
        tau_m=args.tau_m,
        tau_g=args.tau_g,
        d_th=args.d_th,
        k=args.k,
        max_depth=args.max_depth,
        eps_stop=args.eps_stop,
        min_samples=args.min_samples,
        seed=args.seed,
    )
    tree = cas.build_cascade(pool, train_set, val_set, config)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(cas.export_tree(tree))
    print(f"wrote {args.out}")
    return 0


def _external_scores(path) -> dict[str, dict[str, float]]:
    labels, rows = load_score_file(path)
    out = {}
    for ident, raw in rows.items():
        total = raw.sum()
        norm = raw / total if total > 0 else raw * 0 + 1.0 / len(raw)
        out[ident] = {c: float(v) for c, v in zip(labels, norm)}
    return out


def _cmd_eval(args) -> int:
    with open(args.tree, "r", encoding="utf-8") as fh:
        tree = cas.import_tree(fh.read())
    test = load_dataset(args.test)
    fusion = _parse_fusion(args.fusion)
    if fusion is not None:
        if args.external is None:
            raise ExpertCascadeError("--fusion requires --external neural scores")
        neural = _external_scores(args.external)

        def predict(inst):
            if inst.id not in neural:
                raise UnlabeledData(f"no external scores for instance {inst.id!r}")
            fused = cas.fuse(cas.tree_scores(tree, inst), neural[inst.id], fusion)
            return min(fused, key=lambda c: (-fused[c], c))

    else:
        def predict(inst):
            return cas.infer(tree, inst)[0]

    report = evaluate_predictions(test, predict, rare_class=tree.config.rare_class)
    print(canonical_dumps(report.to_json()))
    return 0


def _cmd_explain(args) -> int:
    with open(args.tree, "r", encoding="utf-8") as fh:
        tree = cas.import_tree(fh.read())
    data = load_dataset(args.data)
    inst = data.get(args.id)
    if inst is None:
        raise ExpertCascadeError(f"instance {args.id!r} not found in {args.data}")
    fusion = _parse_fusion(args.fusion)
    neural = None
    if fusion is not None:
        if args.external is None:
            raise ExpertCascadeError("--fusion requires --external neural scores")
        neural = _external_scores(args.external).get(inst.id)
        if neural is None:
            raise ExpertCascadeError(f"no external scores for instance {inst.id!r}")
    record = explain(tree, inst, fusion=fusion, neural_scores=neural)
    sys.stdout.write(explanation_json(record))
    return 0


def _cmd_synth(args) -> int:
    cfg = synth.load_synth_config(args.config)
    splits = synth.synth_generate(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, dataset in sorted(splits.items()):
        path = os.path.join(args.out_dir, f"{name}.csv")
        save_dataset(dataset, path)
        print(f"wrote {path} ({len(dataset)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expertcascade")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-rules", help="check a .ekr rule file")
    p.add_argument("file")
    p.set_defaults(func=_cmd_validate_rules)

    p = sub.add_parser("eig", help="entropy imbalance gain per pool member")
    p.add_argument("--pool", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=_cmd_eig)

    p = sub.add_parser("build", help="build a cascade tree")
    p.add_argument("--pool", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--rare", required=True)
    p.add_argument("--tau-m", type=float, default=0.05)
    p.add_argument("--tau-g", type=float, default=0.2)
    p.add_argument("--d-th", type=float, default=0.5)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--eps-stop", type=float, default=0.005)
    p.add_argument("--min-samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--smote", action="store_true")
    p.add_argument("--smote-k", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("eval", help="evaluate a tree on a labeled dataset")
    p.add_argument("--tree", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--fusion", default=None, help="unweighted | weighted[:alpha]")
    p.add_argument("--external", default=None, help="neural score CSV for fusion")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("explain", help="explanation record for one instance")
    p.add_argument("--tree", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--fusion", default=None)
    p.add_argument("--external", default=None)
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("synth", help="generate synthetic benchmark splits")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExpertCascadeError as exc:
        sys.stderr.write(canonical_dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    except Exception as exc:  # internal error
        sys.stderr.write(canonical_dumps({"error": "InternalError", "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
