"""Performance measures, patient-wise splitting, the repeated train/test
protocol, ROC aggregation and per-case probability timelines."""

from __future__ import annotations

import logging
from decimal import Decimal, localcontext
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import svm
from .errors import AccPulseError, EmptyEvaluation, SingleClassError, SplitError
from .features import FEATURE_NAMES, feature_indices, feature_vector
from .interdep import rolling_mean
from .signals import Recording, align, extract_snippets, prefilter

log = logging.getLogger(__name__)

METRICS = ("balanced_accuracy", "sensitivity", "specificity", "mcc", "f1", "auc")
FPR_GRID = np.linspace(0.0, 1.0, 101)
SMOOTHING_WINDOW = 5


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


class ConfusionCounts(NamedTuple):
    tp: int
    tn: int
    fp: int
    fn: int

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "ConfusionCounts":
        t = np.asarray(y_true) > 0
        p = np.asarray(y_pred) > 0
        return cls(int(np.sum(t & p)), int(np.sum(~t & ~p)), int(np.sum(~t & p)),
                   int(np.sum(t & ~p)))

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _ratio(num: int, den: int) -> float:
    # one integer division: correctly rounded
    return num / den if den else 0.0


def metrics(counts: ConfusionCounts) -> dict:
    """Sensitivity, specificity, balanced accuracy, MCC and F1 of the SC class.

    Undefined rates (no positives or no negatives) are reported as 0 and
    listed under ``"undefined"``; MCC is 0 whenever a marginal is empty.
    Every value is the correctly rounded double of the exact quantity.
    """
    tp, tn, fp, fn = (int(c) for c in counts)
    if min(tp, tn, fp, fn) < 0:
        raise ValueError("confusion counts must be non-negative")
    if tp + tn + fp + fn == 0:
        raise EmptyEvaluation("no evaluated snippets")
    undefined = []
    pos, neg = tp + fn, tn + fp
    if pos == 0:
        undefined.append("sensitivity")
    if neg == 0:
        undefined.append("specificity")
    if undefined:
        undefined.append("balanced_accuracy")
    # (tp/pos + tn/neg) / 2 with undefined rates counted as 0
    sens_num, sens_den = (tp, pos) if pos else (0, 1)
    spec_num, spec_den = (tn, neg) if neg else (0, 1)
    bacc = _ratio(sens_num * spec_den + spec_num * sens_den, 2 * sens_den * spec_den)
    denom = (tp + fp) * pos * neg * (tn + fn)
    if denom > 0:
        with localcontext() as ctx:
            ctx.prec = 60
            mcc = float(Decimal(tp * tn - fp * fn) / Decimal(denom).sqrt())
    else:
        mcc = 0.0
    f1_den = 2 * tp + fp + fn
    if f1_den == 0:
        undefined.append("f1")
    return {
        "balanced_accuracy": bacc,
        "sensitivity": _ratio(tp, pos),
        "specificity": _ratio(tn, neg),
        "mcc": mcc,
        "f1": _ratio(2 * tp, f1_den),
        "undefined": undefined,
    }


class RocCurve(NamedTuple):
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray


def roc_auc(scores, labels) -> tuple[float, RocCurve]:
    """ROC by sweeping every distinct score from high to low; tied scores
    move the curve diagonally. AUC by the trapezoid rule, evaluated in
    integer arithmetic so it equals the normalised Mann-Whitney U."""
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(labels) > 0
    n_pos = int(pos.sum())
    n_neg = int(pos.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s, pos = s[order], pos[order]
    distinct = np.flatnonzero(np.diff(s)) + 1
    ends = np.concatenate([distinct, [s.size]])
    tps = np.concatenate([[0], np.cumsum(pos)[ends - 1]]).astype(np.int64)
    fps = np.concatenate([[0], ends]).astype(np.int64) - tps
    area2 = int(np.sum((fps[1:] - fps[:-1]) * (tps[1:] + tps[:-1])))
    auc = area2 / (2.0 * n_pos * n_neg)
    thresholds = np.concatenate([[np.inf], s[ends - 1]])
    return auc, RocCurve(fps / n_neg, tps / n_pos, thresholds)


def tpr_at(curve: RocCurve, fpr_grid=FPR_GRID) -> np.ndarray:
    """Vertical sample of a ROC curve: linear interpolation along the curve,
    taking the highest TPR where the curve is vertical."""
    fpr, tpr = curve.fpr, curve.tpr
    out = np.empty(len(fpr_grid))
    for k, f in enumerate(fpr_grid):
        i = int(np.searchsorted(fpr, f, side="right")) - 1
        if i + 1 < fpr.size and fpr[i + 1] > fpr[i]:
            w = (f - fpr[i]) / (fpr[i + 1] - fpr[i])
            out[k] = tpr[i] + w * (tpr[i + 1] - tpr[i])
        else:
            out[k] = tpr[i]
    return out


def interval(values) -> tuple[float, float, float]:
    """(mean, lo, hi) with lo/hi = mean -/+ 1.96 standard deviations of the
    per-split values (sample std; a single split gives a point interval)."""
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return mean, mean - 1.96 * sd, mean + 1.96 * sd


# --------------------------------------------------------------------------
# splitting
# --------------------------------------------------------------------------


def assert_disjoint(a, b, what: str = "split") -> None:
    shared = set(a) & set(b)
    if shared:
        raise AssertionError(f"patient leakage in {what}: {sorted(shared)[:5]}")


def patient_split(groups, labels, ratio: float = 3.0, seed: int = 0,
                  max_retries: int = 100) -> tuple[list, list]:
    """Random patient-wise train/test partition near ``ratio``:1 by snippet count.

    Patients are visited in random order and each goes to the test side when
    that brings the test snippet count closer to ``total / (ratio + 1)``.
    Draws where either side misses a class are retried.
    """
    groups = np.asarray(groups)
    labels = np.asarray(labels)
    uniq, inverse, counts = np.unique(groups, return_inverse=True, return_counts=True)
    if uniq.size < 2:
        raise SplitError("need at least two patients")
    has_pos = np.bincount(inverse, weights=labels > 0, minlength=uniq.size) > 0
    has_neg = np.bincount(inverse, weights=labels < 0, minlength=uniq.size) > 0
    target = counts.sum() / (ratio + 1.0)
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        perm = rng.permutation(uniq.size)
        test = np.zeros(uniq.size, dtype=bool)
        n_test = 0
        for p in perm:
            if abs(n_test + counts[p] - target) < abs(n_test - target):
                test[p] = True
                n_test += counts[p]
        train = ~test
        if not test.any() or not train.any():
            continue
        if has_pos[test].any() and has_neg[test].any() and has_pos[train].any() \
                and has_neg[train].any():
            train_ids, test_ids = sorted(uniq[train].tolist()), sorted(uniq[test].tolist())
            assert_disjoint(train_ids, test_ids)
            return train_ids, test_ids
    raise SplitError(f"no split with both classes on both sides after {max_retries} draws")


# --------------------------------------------------------------------------
# protocol
# --------------------------------------------------------------------------


@dataclass
class EvaluationReport:
    per_split: list[dict]
    aggregate: dict
    roc_mean: dict
    failed_splits: list[dict] = field(default_factory=list)
    per_rhythm: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "per_split": self.per_split,
                "aggregate": self.aggregate, "roc_mean": self.roc_mean,
                "per_rhythm": self.per_rhythm, "failed_splits": self.failed_splits}


def split_seeds(master_seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(n)]


def _evaluate_split(X, y, groups, rhythms, seed, grid, folds, jobs, calibrate):
    train_ids, test_ids = patient_split(groups, y, seed=seed)
    tr = np.isin(groups, train_ids)
    te = np.isin(groups, test_ids)
    assert_disjoint(groups[tr], groups[te])
    cv = svm.grid_search_cv(X[tr], y[tr], groups[tr], grid, n_folds=folds, seed=seed, jobs=jobs)
    model = svm.fit_model(X[tr], y[tr], cv.gamma, cv.C, groups=groups[tr], seed=seed,
                          calibrate=calibrate)
    f = svm.predict_decision(model, X[te])
    pred = np.where(f >= 0.0, 1, -1)
    m = metrics(ConfusionCounts.from_labels(y[te], pred))
    auc, curve = roc_auc(f, y[te])
    row = {"seed": seed, "gamma": cv.gamma, "C": cv.C,
           "n_train": int(tr.sum()), "n_test": int(te.sum()),
           "n_train_patients": len(train_ids), "n_test_patients": len(test_ids)}
    row.update({k: float(m[k]) for k in METRICS[:-1]})
    row["auc"] = float(auc)
    by_rhythm = {}
    if rhythms is not None:
        for r in sorted({r for r in rhythms[te] if r}):
            mask = rhythms[te] == r
            c = ConfusionCounts.from_labels(y[te][mask], pred[mask])
            by_rhythm[r] = {"counts": list(c), **{k: v for k, v in metrics(c).items()}}
    return row, tpr_at(curve), by_rhythm


def run_protocol(X, y, groups, n_splits: int = 50, grid: svm.HyperGrid | None = None,
                 folds: int = 20, feature_names: Sequence[str] | None = None,
                 master_seed: int = 0, rhythms=None, jobs: int = 1,
                 calibrate: bool = False) -> EvaluationReport:
    """Repeat split -> grid-search CV -> refit -> test ``n_splits`` times.

    ``X`` holds all 49 features; ``feature_names`` selects the columns the
    models see. A split that raises a data error is logged, recorded under
    ``failed_splits`` and left out of the aggregate.
    """
    grid = grid or svm.default_grid()
    names = tuple(feature_names) if feature_names else FEATURE_NAMES
    X = np.asarray(X, dtype=float)
    if X.shape[1] == len(FEATURE_NAMES) and names != FEATURE_NAMES:
        X = X[:, feature_indices(names)]
    y = np.asarray(y)
    groups = np.asarray(groups)
    rhythms = None if rhythms is None else np.asarray(rhythms, dtype=object)
    rows, tprs, failed = [], [], []
    rhythm_rows: dict[str, list] = {}
    for k, seed in enumerate(split_seeds(master_seed, n_splits)):
        try:
            row, tpr, by_rhythm = _evaluate_split(X, y, groups, rhythms, seed, grid, folds,
                                                  jobs, calibrate)
        except AccPulseError as exc:
            log.warning("split %d (seed %d) failed: %s", k, seed, exc)
            failed.append({"split": k, "seed": seed, "error": f"{type(exc).__name__}: {exc}"})
            continue
        row = {"split": k, **row}
        rows.append(row)
        tprs.append(tpr)
        for r, v in by_rhythm.items():
            rhythm_rows.setdefault(r, []).append(v)
    aggregate = {}
    roc = {"fpr": FPR_GRID.tolist(), "tpr_mean": [], "tpr_lo": [], "tpr_hi": []}
    if rows:
        for name in METRICS:
            mean, lo, hi = interval([r[name] for r in rows])
            vals = [r[name] for r in rows]
            aggregate[name] = {"mean": mean, "ci_lo": lo, "ci_hi": hi,
                               "p2_5": float(np.percentile(vals, 2.5)),
                               "p97_5": float(np.percentile(vals, 97.5))}
        T = np.vstack(tprs)
        mean = T.mean(axis=0)
        sd = T.std(axis=0, ddof=1) if T.shape[0] > 1 else np.zeros_like(mean)
        roc["tpr_mean"] = mean.tolist()
        roc["tpr_lo"] = np.clip(mean - 1.96 * sd, 0.0, 1.0).tolist()
        roc["tpr_hi"] = np.clip(mean + 1.96 * sd, 0.0, 1.0).tolist()
    per_rhythm = {}
    for r, vals in sorted(rhythm_rows.items()):
        per_rhythm[r] = {name: interval([v[name] for v in vals])[0]
                         for name in ("balanced_accuracy", "sensitivity", "specificity")}
        per_rhythm[r]["splits"] = len(vals)
    config = {"n_splits": n_splits, "folds": folds, "grid_points": len(grid),
              "master_seed": master_seed, "features": list(names)}
    return EvaluationReport(rows, aggregate, roc, failed, per_rhythm, config)


# --------------------------------------------------------------------------
# timeline
# --------------------------------------------------------------------------


class TimelinePoint(NamedTuple):
    start_time_s: float
    probability: float
    label: int
    smoothed_probability: float
    pause_index: int


def smooth_by_pause(probabilities, pause_index, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Centered moving average that never mixes snippets of different pauses."""
    p = np.asarray(probabilities, dtype=float)
    pause_index = np.asarray(pause_index)
    out = np.empty_like(p)
    for k in np.unique(pause_index):
        m = pause_index == k
        out[m] = rolling_mean(p[m], window)
    return out


def timeline(model: svm.TrainedModel, recording: Recording) -> list[TimelinePoint]:
    """Calibrated P(SC) and label for every accepted snippet of a case."""
    aligned = align(recording)
    snippets = [s for s in extract_snippets(recording, aligned) if prefilter(s)]
    if not snippets:
        log.warning("%s: no accepted snippets", recording.patient_id)
        return []
    cols = feature_indices(model.feature_order or FEATURE_NAMES)
    X = np.vstack([feature_vector(s).values[cols] for s in snippets])
    labels, probs = svm.predict(model, X)
    pauses = [s.pause_index for s in snippets]
    smoothed = smooth_by_pause(probs, pauses)
    return [TimelinePoint(s.start_time_s, float(p), int(lab), float(sm), s.pause_index)
            for s, p, lab, sm in zip(snippets, probs, labels, smoothed)]
