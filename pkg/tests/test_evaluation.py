import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accpulse import evaluation as ev
from accpulse.errors import EmptyEvaluation, SingleClassError, SplitError
from accpulse.svm import HyperGrid

import oracles


# metrics --------------------------------------------------------------------


def test_metrics_examples():
    m = ev.metrics(ev.ConfusionCounts(5, 7, 0, 0))
    assert all(m[k] == 1.0 for k in ("balanced_accuracy", "sensitivity", "specificity",
                                     "mcc", "f1"))
    m = ev.metrics(ev.ConfusionCounts(tp=2, tn=2, fp=1, fn=1))
    assert m["sensitivity"] == 2 / 3 and m["specificity"] == 2 / 3
    assert m["balanced_accuracy"] == 2 / 3
    assert m["mcc"] == 1 / 3
    assert m["f1"] == 4 / 6
    m = ev.metrics(ev.ConfusionCounts(tp=4, tn=3, fp=2, fn=1))  # sens 0.8, spec 0.6
    assert m["balanced_accuracy"] == pytest.approx(0.7)


def test_metrics_undefined_and_empty():
    m = ev.metrics(ev.ConfusionCounts(0, 5, 1, 0))
    assert "sensitivity" in m["undefined"] and m["mcc"] == 0.0
    with pytest.raises(EmptyEvaluation):
        ev.metrics(ev.ConfusionCounts(0, 0, 0, 0))


@given(st.tuples(*[st.integers(0, 50)] * 4).filter(lambda c: sum(c) > 0))
def test_metrics_relabeling_symmetry(c):
    tp, tn, fp, fn = c
    m = ev.metrics(ev.ConfusionCounts(tp, tn, fp, fn))
    s = ev.metrics(ev.ConfusionCounts(tn, tp, fn, fp))  # SC <-> AR
    assert m["sensitivity"] == s["specificity"] and m["specificity"] == s["sensitivity"]
    assert m["balanced_accuracy"] == s["balanced_accuracy"]
    assert m["mcc"] == s["mcc"]


def test_metrics_exact_small_grid():
    # the exhaustive sweep lives in the acceptance suite; spot-check here
    for c in [(1, 0, 0, 0), (3, 1, 2, 5), (0, 0, 4, 1), (7, 2, 2, 1)]:
        m = ev.metrics(ev.ConfusionCounts(*c))
        o = oracles.exact_metrics(*c)
        assert m["f1"] == float(o["f1"])
        assert oracles.is_correctly_rounded_sqrt(m["mcc"], o["mcc_sign"], o["mcc_sq"])


# ROC / AUC ------------------------------------------------------------------


def test_auc_examples():
    assert ev.roc_auc([0.1, 0.2, 0.8, 0.9], [-1, -1, 1, 1])[0] == 1.0
    assert ev.roc_auc([0.3] * 6, [1, -1, 1, -1, -1, 1])[0] == 0.5
    with pytest.raises(SingleClassError):
        ev.roc_auc([1, 2], [1, 1])


@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=20)
       .filter(lambda v: 0 < sum(b for _, b in v) < len(v)))
@settings(max_examples=200)
def test_auc_pair_counting_and_monotone_transform(pairs):
    s = [float(a) for a, _ in pairs]
    y = [1 if b else -1 for _, b in pairs]
    auc, curve = ev.roc_auc(s, y)
    assert auc == float(oracles.auc_pairs(s, y))
    assert ev.roc_auc(np.exp(s) * 3 - 1, y)[0] == auc
    assert curve.fpr[0] == 0 and curve.tpr[-1] == 1
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)


def test_tpr_at_vertical_and_interpolated():
    curve = ev.RocCurve(np.array([0.0, 0.0, 0.5, 1.0]), np.array([0.0, 0.6, 0.8, 1.0]),
                        np.zeros(4))
    t = ev.tpr_at(curve, np.array([0.0, 0.25, 1.0]))
    np.testing.assert_allclose(t, [0.6, 0.7, 1.0])


def test_interval_brackets_mean_and_single_split():
    m, lo, hi = ev.interval([0.5])
    assert m == lo == hi == 0.5
    vals = [0.0] + [1.0] * 49
    m, lo, hi = ev.interval(vals)
    assert lo <= m <= hi


# splitting ------------------------------------------------------------------


def test_patient_split_equal_counts():
    groups = np.repeat(["a", "b", "c", "d"], 10)
    labels = np.tile([1, -1], 20)
    tr, te = ev.patient_split(groups, labels, seed=0)
    assert len(tr) == 3 and len(te) == 1
    assert not set(tr) & set(te)


def test_patient_split_ratio_on_skewed_counts():
    rng = np.random.default_rng(0)
    counts = rng.integers(2, 40, 40)
    groups = np.repeat(np.arange(40), counts)
    labels = np.where(groups % 2 == 0, 1, -1)
    for seed in range(30):
        tr, te = ev.patient_split(groups, labels, seed=seed)
        n_te = np.isin(groups, te).sum()
        ratio = (groups.size - n_te) / n_te
        assert abs(ratio - 3.0) <= 0.3
        assert not set(tr) & set(te)


def test_patient_split_impossible_coverage():
    groups = np.array(["a", "a", "b", "b"])
    labels = np.array([1, 1, -1, -1])  # each side can only hold one class
    with pytest.raises(SplitError):
        ev.patient_split(groups, labels, seed=0, max_retries=20)


def test_patient_split_leakage_assertion():
    with pytest.raises(AssertionError):
        ev.assert_disjoint(["a", "b"], ["b"])


# protocol -------------------------------------------------------------------


def _toy_table(rng, n_patients=12, per=8):
    groups = np.repeat([f"p{i:02d}" for i in range(n_patients)], per)
    y = np.where(np.arange(n_patients * per) // per % 2 == 0, 1, -1)
    X = rng.standard_normal((y.size, 49))
    X[:, 0] += 3.0 * y
    return X, y, groups


def test_run_protocol_single_split_and_determinism(rng):
    X, y, g = _toy_table(rng)
    grid = HyperGrid((0.01, 0.1), (1.0, 10.0))
    r1 = ev.run_protocol(X, y, g, n_splits=1, grid=grid, folds=4, master_seed=5)
    assert len(r1.per_split) == 1
    a = r1.aggregate["balanced_accuracy"]
    assert a["mean"] == a["ci_lo"] == a["ci_hi"]
    r2 = ev.run_protocol(X, y, g, n_splits=1, grid=grid, folds=4, master_seed=5)
    assert json.dumps(r1.to_dict()) == json.dumps(r2.to_dict())
    assert len(r1.roc_mean["tpr_mean"]) == 101


def test_run_protocol_failed_split_recorded(rng, caplog):
    X, y, g = _toy_table(rng, n_patients=8)
    grid = HyperGrid((0.1,), (1.0,))
    rep = ev.run_protocol(X, y, g, n_splits=2, grid=grid, folds=20)  # too few patients
    assert not rep.per_split and len(rep.failed_splits) == 2
    assert "FoldError" in rep.failed_splits[0]["error"]
    assert any("failed" in r.message for r in caplog.records)


def test_run_protocol_feature_subset_and_rhythm(rng):
    X, y, g = _toy_table(rng)
    rhythms = np.where(y > 0, "ORG", "VF")
    rep = ev.run_protocol(X, y, g, n_splits=2, grid=HyperGrid((0.1,), (1.0,)), folds=4,
                          feature_names=("v1", "v2"), rhythms=rhythms)
    assert rep.config["features"] == ["v1", "v2"]
    assert set(rep.per_rhythm) == {"ORG", "VF"}
    for name in ev.METRICS:
        agg = rep.aggregate[name]
        assert agg["ci_lo"] <= agg["mean"] <= agg["ci_hi"]


# smoothing ------------------------------------------------------------------


def test_smoothing_examples():
    np.testing.assert_allclose(ev.smooth_by_pause([0.3] * 7, [0] * 7), 0.3)
    out = ev.smooth_by_pause([0, 0, 1, 0, 0], [0] * 5)
    assert out[2] == pytest.approx(0.2)
    out = ev.smooth_by_pause([1, 1, 1, 0, 0, 0], [0, 0, 0, 1, 1, 1])
    np.testing.assert_array_equal(out, [1, 1, 1, 0, 0, 0])
