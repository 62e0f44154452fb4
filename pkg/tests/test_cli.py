import csv
import json
import subprocess
import sys

import pytest

from expertcascade import cli
from expertcascade.data import load_dataset
from expertcascade.jsonutil import canonical_dumps

RULES = '''
# one proposition per class, centered on the class means
prop near_common := sigmoid(feature "x", center=2.0, scale=0.8, direction=-)
prop near_mid := sigmoid(feature "y", center=2.0, scale=0.8, direction=+)
prop near_rare := sigmoid(feature "x", center=6.0, scale=0.8, direction=+)

rule common := near_common
rule mid := near_mid
rule rare := near_rare
'''

SYNTH_CONFIG = {
    "seed": 21,
    "features": ["x", "y"],
    "classes": {
        "common": {"prior": 0.6, "components": [{"mean": [0.0, 0.0], "std": [0.7, 0.7]}]},
        "mid": {"prior": 0.3, "components": [{"mean": [0.0, 4.0], "std": [0.7, 0.7]}]},
        "rare": {"prior": 0.1, "components": [{"mean": [8.0, 0.0], "std": [0.7, 0.7]}]},
    },
    "rare_class": "rare",
    "rare_rule": [{"feature": "x", "op": ">", "value": 6.0}],
    "domains": {"source": {}},
    "splits": {
        "train": {"n": 120, "domain": "source"},
        "val": {"n": 60, "domain": "source"},
        "test": {"n": 60, "domain": "source"},
    },
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "synth.json").write_text(json.dumps(SYNTH_CONFIG))
    assert cli.main(["synth", "--config", str(root / "synth.json"),
                     "--out-dir", str(root / "data")]) == 0
    (root / "rules.ekr").write_text(RULES)
    pool = {
        "classifiers": [
            {"id": "expert", "kind": "rule", "labels": ["common", "mid", "rare"],
             "rules": "rules.ekr"},
            {"id": "knn", "kind": "knn", "labels": ["common", "mid", "rare"], "k": 3},
        ]
    }
    (root / "pool.json").write_text(json.dumps(pool))
    rule_only = {"classifiers": [pool["classifiers"][0]]}
    (root / "pool_rule.json").write_text(json.dumps(rule_only))
    test = load_dataset(root / "data" / "test.csv")
    with open(root / "neural.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "common", "mid", "rare"])
        one_hot = {"common": (0.9, 0.05, 0.05), "mid": (0.05, 0.9, 0.05),
                   "rare": (0.05, 0.05, 0.9)}
        for inst in test:
            writer.writerow([inst.id] + list(one_hot[inst.label]))
    return root


def run(args):
    return cli.main([str(a) for a in args])


def build_tree(workspace, out_name, pool="pool.json"):
    out = workspace / out_name
    code = run(["build", "--pool", workspace / pool,
                "--train", workspace / "data" / "train.csv",
                "--val", workspace / "data" / "val.csv",
                "--rare", "rare", "--k", 3, "--min-samples", 6,
                "--eps-stop", -1.0, "--max-depth", 3,
                "--out", out])
    assert code == 0
    return out


class TestValidateRules:
    def test_valid_file(self, workspace, capsys):
        assert run(["validate-rules", workspace / "rules.ekr"]) == 0
        out = capsys.readouterr().out
        assert "3 proposition(s)" in out
        assert "3 class rule(s)" in out

    def test_parse_error_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.ekr"
        bad.write_text("rule X := (p1")
        assert run(["validate-rules", bad]) == 1
        diag = json.loads(capsys.readouterr().err)
        assert diag["error"] in ("ParseError", "ValidationError")

    def test_missing_file_exits_two(self, tmp_path, capsys):
        assert run(["validate-rules", tmp_path / "nope.ekr"]) == 2
        assert json.loads(capsys.readouterr().err)["error"] == "InternalError"


class TestEig:
    def test_one_report_per_member(self, workspace, capsys):
        assert run(["eig", "--pool", workspace / "pool.json",
                    "--data", workspace / "data" / "train.csv", "--k", 3]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        reports = [json.loads(line) for line in lines]
        assert [r["classifier_id"] for r in reports] == ["expert", "knn"]
        for r in reports:
            assert r["eig"] == pytest.approx(r["eta_raw"] - r["eta_model"])


class TestBuildEvalExplain:
    def test_build_is_deterministic(self, workspace, capsys):
        first = build_tree(workspace, "tree_a.json")
        second = build_tree(workspace, "tree_b.json")
        capsys.readouterr()
        assert first.read_bytes() == second.read_bytes()

    def test_eval_reports_rare_metrics(self, workspace, capsys):
        tree = build_tree(workspace, "tree.json")
        capsys.readouterr()
        assert run(["eval", "--tree", tree, "--test", workspace / "data" / "test.csv"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["rare_class"] == "rare"
        assert report["accuracy"] > 0.8
        assert 0.0 <= report["sensitivity"] <= 1.0
        assert set(report["per_class"]) >= {"common", "mid", "rare"}

    def test_eval_with_fusion(self, workspace, capsys):
        tree = build_tree(workspace, "tree.json")
        capsys.readouterr()
        for fusion in ("unweighted", "weighted:0.5"):
            assert run(["eval", "--tree", tree, "--test", workspace / "data" / "test.csv",
                        "--fusion", fusion, "--external", workspace / "neural.csv"]) == 0
            report = json.loads(capsys.readouterr().out)
            assert report["accuracy"] > 0.8

    def test_fusion_requires_external(self, workspace, capsys):
        tree = build_tree(workspace, "tree.json")
        capsys.readouterr()
        assert run(["eval", "--tree", tree, "--test", workspace / "data" / "test.csv",
                    "--fusion", "unweighted"]) == 1
        assert "external" in json.loads(capsys.readouterr().err)["message"]

    def test_unknown_fusion_mode(self, workspace, capsys):
        tree = build_tree(workspace, "tree.json")
        capsys.readouterr()
        assert run(["eval", "--tree", tree, "--test", workspace / "data" / "test.csv",
                    "--fusion", "mystery", "--external", workspace / "neural.csv"]) == 1

    def test_explain_emits_record(self, workspace, capsys):
        tree = build_tree(workspace, "tree_rule.json", pool="pool_rule.json")
        capsys.readouterr()
        assert run(["explain", "--tree", tree, "--data", workspace / "data" / "test.csv",
                    "--id", "test_00000"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["instance_id"] == "test_00000"
        assert record["path"]
        assert record["knowledge_nodes"]  # rule expert sits on the path
        # canonical output: re-serializing reproduces the bytes
        assert canonical_dumps(record) == canonical_dumps(json.loads(canonical_dumps(record)))

    def test_explain_with_fusion(self, workspace, capsys):
        tree = build_tree(workspace, "tree.json")
        capsys.readouterr()
        assert run(["explain", "--tree", tree, "--data", workspace / "data" / "test.csv",
                    "--id", "test_00000", "--fusion", "unweighted",
                    "--external", workspace / "neural.csv"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["fusion"]["mode"] == "unweighted"
        assert record["y_final"] == record["fusion"]["y_fused"]

    def test_explain_unknown_id(self, workspace, capsys):
        tree = build_tree(workspace, "tree.json")
        capsys.readouterr()
        assert run(["explain", "--tree", tree, "--data", workspace / "data" / "test.csv",
                    "--id", "ghost"]) == 1

    def test_build_with_smote(self, workspace, capsys):
        out = workspace / "tree_smote.json"
        assert run(["build", "--pool", workspace / "pool.json",
                    "--train", workspace / "data" / "train.csv",
                    "--val", workspace / "data" / "val.csv",
                    "--rare", "rare", "--k", 3, "--min-samples", 6,
                    "--eps-stop", -1.0, "--max-depth", 3, "--smote",
                    "--out", out]) == 0
        doc = json.loads(out.read_text())
        # oversampling balances the rare class up to the majority count
        assert doc["build_log"][0]["samples"] > 120


class TestSynthCommand:
    def test_outputs_are_deterministic(self, workspace, tmp_path, capsys):
        assert run(["synth", "--config", workspace / "synth.json",
                    "--out-dir", tmp_path / "again"]) == 0
        capsys.readouterr()
        for name in ("train", "val", "test"):
            fresh = (tmp_path / "again" / f"{name}.csv").read_bytes()
            original = (workspace / "data" / f"{name}.csv").read_bytes()
            assert fresh == original

    def test_bad_config_exits_one(self, tmp_path, capsys):
        cfg = dict(SYNTH_CONFIG)
        cfg["rare_class"] = "ghost"
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg))
        assert run(["synth", "--config", path, "--out-dir", tmp_path / "out"]) == 1
        assert json.loads(capsys.readouterr().err)["error"] == "InvalidConfig"


def test_console_entry_point(tmp_path):
    rules = tmp_path / "ok.ekr"
    rules.write_text('prop p := threshold(feature "x", >, 0)\nrule A := p\n')
    proc = subprocess.run(
        [sys.executable, "-m", "expertcascade.cli", "validate-rules", str(rules)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "ok:" in proc.stdout
