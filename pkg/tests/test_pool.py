import numpy as np
import pytest

from expertcascade.data import Dataset, Instance
from expertcascade.dsl import parse_ruleset
from expertcascade.errors import (
    DuplicateId,
    EmptyPartition,
    ExternalScoreMissing,
    SchemaMismatch,
    UnknownInstance,
)
from expertcascade.pool import ClassifierSpec, Pool, TrainedClassifier, partition_by_prediction, train


def dataset(rows, schema=("x", "y")):
    return Dataset(
        instances=[
            Instance(id=f"i{k}", domain="d", label=lbl, features=dict(zip(schema, feats)))
            for k, (feats, lbl) in enumerate(rows)
        ],
        schema=schema,
    )


TWO_CLASS = dataset(
    [((0.0, 0.0), "A"), ((0.1, 0.1), "A"), ((0.2, -0.1), "A"),
     ((5.0, 5.0), "B"), ((5.1, 4.9), "B"), ((4.9, 5.2), "B")]
)


class TestPoolRegistry:
    def test_registration_order(self):
        pool = Pool()
        pool.register(ClassifierSpec("knn", "knn", ("A", "B"), {"k": 3}))
        pool.register(ClassifierSpec("rules", "knn", ("A", "B")))
        assert [s.id for s in pool] == ["knn", "rules"]
        assert pool.order_of("rules") == 1

    def test_duplicate_id(self):
        pool = Pool()
        pool.register(ClassifierSpec("m", "knn", ("A", "B")))
        with pytest.raises(DuplicateId):
            pool.register(ClassifierSpec("m", "logistic", ("A", "B")))

    def test_external_missing_file_accepted_at_registration(self):
        pool = Pool()
        pool.register(ClassifierSpec("ext", "external", ("A", "B"), {"path": "/no/such.csv"}))
        with pytest.raises(OSError):
            train(pool.specs[0], TWO_CLASS)

    def test_label_set_needs_two(self):
        with pytest.raises(ValueError):
            ClassifierSpec("m", "knn", ("A",))


class TestKnn:
    def test_vote_fraction(self):
        spec = ClassifierSpec("knn", "knn", ("A", "B"), {"k": 3})
        model = train(spec, TWO_CLASS)
        pred = model.predict(
            Instance(id="q", domain="d", label=None, features={"x": 0.05, "y": 0.0})
        )
        assert pred.label == "A"
        assert pred.confidence == pytest.approx(1.0)

    def test_mixed_vote(self):
        data = dataset([((0.0,), "A"), ((1.0,), "A"), ((2.0,), "B")], schema=("x",))
        model = train(ClassifierSpec("knn", "knn", ("A", "B"), {"k": 3}), data)
        pred = model.predict(Instance(id="q", domain="d", label=None, features={"x": 1.0}))
        assert pred.label == "A"
        assert pred.confidence == pytest.approx(2 / 3)

    def test_fingerprint_stable(self):
        spec = ClassifierSpec("knn", "knn", ("A", "B"), {"k": 3})
        assert train(spec, TWO_CLASS).fingerprint == train(spec, TWO_CLASS).fingerprint

    def test_fingerprint_tracks_data(self):
        spec = ClassifierSpec("knn", "knn", ("A", "B"), {"k": 3})
        other = dataset([((0.0, 0.0), "A"), ((9.0, 9.0), "B")])
        assert train(spec, TWO_CLASS).fingerprint != train(spec, other).fingerprint

    def test_empty_partition(self):
        with pytest.raises(EmptyPartition):
            train(ClassifierSpec("knn", "knn", ("A", "B")), TWO_CLASS.subset([]))


class TestLogistic:
    def test_separable_training_accuracy(self):
        spec = ClassifierSpec("lr", "logistic", ("A", "B"))
        model = train(spec, TWO_CLASS)
        preds = [model.predict(inst).label for inst in TWO_CLASS]
        assert preds == [inst.label for inst in TWO_CLASS]

    def test_zero_iterations_uniform(self):
        data = dataset(
            [((0.0, 0.0), "A"), ((1.0, 1.0), "B"), ((2.0, 0.0), "C"), ((0.0, 2.0), "D")]
        )
        spec = ClassifierSpec("lr", "logistic", ("A", "B", "C", "D"), {"iterations": 0})
        model = train(spec, data)
        pred = model.predict(data.instances[0])
        assert all(v == pytest.approx(0.25) for v in pred.scores.values())

    def test_deterministic(self):
        spec = ClassifierSpec("lr", "logistic", ("A", "B"))
        m1, m2 = train(spec, TWO_CLASS), train(spec, TWO_CLASS)
        assert m1.fingerprint == m2.fingerprint
        q = Instance(id="q", domain="d", label=None, features={"x": 2.0, "y": 2.0})
        assert m1.predict(q) == m2.predict(q)


RULES = '''
prop near_origin := sigmoid(feature "x", center=2.5, scale=0.5, direction=-)
prop far := sigmoid(feature "x", center=2.5, scale=0.5, direction=+)
rule A := near_origin
rule B := far
'''


class TestRuleClassifier:
    def test_train_and_predict(self):
        rs = parse_ruleset(RULES)
        spec = ClassifierSpec("rules", "rule", ("A", "B"), {"ruleset": rs})
        model = train(spec, TWO_CLASS)
        pred = model.predict(
            Instance(id="q", domain="d", label=None, features={"x": 0.0, "y": 0.0})
        )
        assert pred.label == "A"
        assert sum(pred.scores.values()) == pytest.approx(1.0)

    def test_one_vs_rest_mapping(self):
        # weighted-sum scoring ignores negations, so each class needs its
        # own proposition rather than a negated shared one
        text = (
            'prop far := sigmoid(feature "x", center=2.5, scale=0.5, direction=+)\n'
            'prop near := sigmoid(feature "x", center=2.5, scale=0.5, direction=-)\n'
            "rule B := far\nrule rest := near"
        )
        rs = parse_ruleset(text)
        spec = ClassifierSpec("ovr", "rule", ("B", "rest"), {"ruleset": rs})
        three = dataset(
            [((0.0, 0.0), "A"), ((0.3, 0.0), "C"), ((5.0, 5.0), "B"), ((5.5, 5.0), "B")]
        )
        model = train(spec, three)
        pred = model.predict(three.instances[0])
        assert pred.label == "rest"


class TestExternal:
    def _score_file(self, tmp_path, rows, labels=("A", "B")):
        path = tmp_path / "scores.csv"
        lines = ["id," + ",".join(labels)]
        lines += [f"{ident}," + ",".join(str(v) for v in vals) for ident, vals in rows]
        path.write_text("\n".join(lines) + "\n")
        return str(path)

    def test_renormalized_row(self, tmp_path):
        path = self._score_file(
            tmp_path, [(f"i{k}", (0.2, 0.6)) for k in range(6)]
        )
        spec = ClassifierSpec("ext", "external", ("A", "B"), {"path": path})
        model = train(spec, TWO_CLASS)
        pred = model.predict(TWO_CLASS.instances[0])
        assert pred.label == "B"
        assert pred.confidence == pytest.approx(0.75)

    def test_missing_id_at_train(self, tmp_path):
        path = self._score_file(tmp_path, [(f"i{k}", (1, 0)) for k in range(5)])
        spec = ClassifierSpec("ext", "external", ("A", "B"), {"path": path})
        with pytest.raises(ExternalScoreMissing):
            train(spec, TWO_CLASS)

    def test_unknown_instance_at_predict(self, tmp_path):
        path = self._score_file(tmp_path, [(f"i{k}", (1, 0)) for k in range(6)])
        model = train(ClassifierSpec("ext", "external", ("A", "B"), {"path": path}), TWO_CLASS)
        with pytest.raises(UnknownInstance):
            model.predict(Instance(id="nope", domain="d", label=None, features={"x": 0, "y": 0}))

    def test_label_mismatch(self, tmp_path):
        path = self._score_file(tmp_path, [(f"i{k}", (1, 0)) for k in range(6)], labels=("X", "Y"))
        with pytest.raises(SchemaMismatch):
            train(ClassifierSpec("ext", "external", ("A", "B"), {"path": path}), TWO_CLASS)


class TestInvariants:
    def test_scores_normalized_and_in_label_set(self):
        rng = np.random.default_rng(7)
        data = dataset(
            [((float(rng.normal()), float(rng.normal())), rng.choice(["A", "B", "C"]))
             for _ in range(30)]
        )
        specs = [
            ClassifierSpec("knn", "knn", ("A", "B", "C"), {"k": 5}),
            ClassifierSpec("lr", "logistic", ("A", "B", "C")),
        ]
        for spec in specs:
            model = train(spec, data)
            for inst in data:
                pred = model.predict(inst)
                assert pred.label in spec.label_set
                assert sum(pred.scores.values()) == pytest.approx(1.0, abs=1e-9)
                assert all(v >= 0 for v in pred.scores.values())
                assert pred.confidence == pred.scores[pred.label]

    def test_partition_disjoint_cover(self):
        model = train(ClassifierSpec("knn", "knn", ("A", "B"), {"k": 1}), TWO_CLASS)
        parts = partition_by_prediction(model, TWO_CLASS)
        ids = [i for part in parts.values() for i in part.ids]
        assert sorted(ids) == sorted(TWO_CLASS.ids)
        assert len(ids) == len(set(ids))

    def test_constant_classifier_single_partition(self):
        data = dataset([((0.0, 0.0), "A"), ((0.1, 0.0), "A"), ((0.2, 0.0), "B")])
        model = train(ClassifierSpec("knn", "knn", ("A", "B"), {"k": 3}), data)
        parts = partition_by_prediction(model, data)
        assert list(parts) == ["A"]
        assert len(parts["A"]) == 3

    def test_round_trip_serialization(self, tmp_path):
        rs = parse_ruleset(RULES)
        specs = [
            ClassifierSpec("knn", "knn", ("A", "B"), {"k": 3}),
            ClassifierSpec("lr", "logistic", ("A", "B")),
            ClassifierSpec("rules", "rule", ("A", "B"), {"ruleset": rs}),
        ]
        q = Instance(id="q", domain="d", label=None, features={"x": 1.0, "y": 0.5})
        for spec in specs:
            model = train(spec, TWO_CLASS)
            clone = TrainedClassifier.from_json(model.to_json())
            assert clone.fingerprint == model.fingerprint
            assert clone.predict(q) == model.predict(q)
