"""Robust scaling, RBF-kernel C-SVC trained by SMO, Platt calibration and
patient-grouped grid-search cross-validation."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _smo
from .errors import (EmptyTrainingSet, FoldError, ModelFormatError, ShapeError,
                     SingleClassError)
from .files import atomic_write_text

log = logging.getLogger(__name__)

IQR_FLOOR = 1e-9
DEFAULT_CACHE_MB = 256.0


# --------------------------------------------------------------------------
# scaling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Scaler:
    """Per-feature median / IQR standardisation fitted on training rows."""

    medians: np.ndarray
    iqrs: np.ndarray
    flags: tuple[str, ...] = ()

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.medians.shape[0]:
            raise ShapeError(f"expected {self.medians.shape[0]} features, got {X.shape[-1]}")
        return (X - self.medians) / self.iqrs


def fit_scaler(X) -> Scaler:
    """Fit median/IQR scaling; IQRs below ``IQR_FLOOR`` are replaced by 1."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyTrainingSet("cannot fit a scaler on zero rows")
    q25, med, q75 = np.percentile(X, [25.0, 50.0, 75.0], axis=0)
    iqr = q75 - q25
    small = iqr < IQR_FLOOR
    flags = tuple(f"iqr_floor:{k}" for k in np.flatnonzero(small))
    iqr = np.where(small, 1.0, iqr)
    return Scaler(medians=med, iqrs=iqr, flags=flags)


# --------------------------------------------------------------------------
# hyperparameter grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperGrid:
    gammas: tuple[float, ...]
    cs: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.gammas) * len(self.cs)

    def points(self) -> list[tuple[float, float]]:
        return [(g, c) for g in self.gammas for c in self.cs]


def default_grid() -> HyperGrid:
    """gamma = 10^(-5 + n/4), n = 0..14 and C = 10^(-3 + n/3), n = 0..15."""
    gammas = tuple(10.0 ** (-5.0 + n / 4.0) for n in range(15))
    cs = tuple(10.0 ** (-3.0 + n / 3.0) for n in range(16))
    return HyperGrid(gammas=gammas, cs=cs)


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainedModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    C: float
    scaler: Scaler | None = None
    feature_order: tuple[str, ...] = ()
    platt_a: float = 0.0
    platt_b: float = 0.0
    calibrated: bool = False
    flags: tuple[str, ...] = ()
    # solver diagnostics, not serialised
    n_iter: int = field(default=0, compare=False)
    kkt_gap: float = field(default=0.0, compare=False)

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])


def _as_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("labels must be +1 or -1")
    return y


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row order independent of the order rows were supplied in.

    SMO's working-set ties are resolved by index, so solving in this order
    makes the fitted decision function invariant to row permutation.
    """
    keys = [y] + [X[:, c] for c in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(tuple(keys))


def _solve(K, X, gamma, y, C, tol, max_iter, cache_rows, alpha=None, G=None):
    n = y.shape[0]
    if alpha is None:
        alpha = np.zeros(n)
        G = -np.ones(n)
    it, gap = _smo.smo_solve(K, X, float(gamma), y, float(C), float(tol), int(max_iter),
                             alpha, G, int(cache_rows))
    rho = _smo.compute_rho(y, alpha, G, float(C))
    return alpha, G, rho, int(it), max(float(gap), 0.0)


def _default_max_iter(n: int) -> int:
    return max(10_000_000, 100 * n)


def _cache_rows(n: int, cache_mb: float) -> int:
    return max(2, int(cache_mb * 1024 * 1024 // (8 * max(n, 1))))


def train_svm(X_scaled, y, gamma: float, C: float, tol: float = 1e-3,
              max_iter: int | None = None, cache_mb: float = DEFAULT_CACHE_MB,
              feature_order: Sequence[str] = ()) -> TrainedModel:
    """Train an uncalibrated RBF C-SVC.

    Parameters
    ----------
    X_scaled : array, shape (n, d)
        Already scaled design matrix.
    y : array of +1/-1
    gamma, C : float
        Kernel width in ``exp(-gamma ||x - x'||^2)`` and box constraint.
    tol : float
        Stop once the maximal KKT violation drops below ``tol``.
    max_iter : int, optional
        SMO iteration cap. On hitting it the current iterate is returned and
        flagged ``not_converged``.
    cache_mb : float
        Kernel memory budget. The full kernel is precomputed when it fits,
        otherwise rows are computed on demand into a bounded cache.
    """
    X = np.ascontiguousarray(X_scaled, dtype=float)
    y = _as_labels(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError("X and y disagree in length")
    if X.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    if np.unique(y).size < 2:
        raise SingleClassError("training labels contain a single class")
    if gamma <= 0 or C <= 0:
        raise ValueError("gamma and C must be positive")

    order = canonical_order(X, y)
    X = np.ascontiguousarray(X[order])
    y = np.ascontiguousarray(y[order])
    n = y.shape[0]
    max_iter = _default_max_iter(n) if max_iter is None else max_iter
    rows = _cache_rows(n, cache_mb)
    if rows >= n:
        K = _smo.rbf_cross(X, X, float(gamma))
    else:
        K = np.zeros((0, 0))
    alpha, G, rho, it, gap = _solve(K, X, gamma, y, C, tol, max_iter, rows)
    flags = ()
    if gap >= tol:
        log.warning("SMO stopped at max_iter=%d with KKT gap %.3g", max_iter, gap)
        flags = ("not_converged",)
    sv = alpha > 0.0
    return TrainedModel(
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * y)[sv].copy(),
        bias=-float(rho),
        gamma=float(gamma),
        C=float(C),
        feature_order=tuple(feature_order),
        flags=flags,
        n_iter=it,
        kkt_gap=gap,
    )


def decision_function(model: TrainedModel, X_scaled) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X_scaled, dtype=float))
    if X.shape[1] != model.n_features:
        raise ShapeError(f"expected {model.n_features} features, got {X.shape[1]}")
    if model.support_vectors.shape[0] == 0:
        return np.full(X.shape[0], model.bias)
    return _smo.decision_values(np.ascontiguousarray(X), model.support_vectors,
                                model.dual_coef, model.gamma, model.bias)


def kkt_residual(X_scaled, y, alpha, C: float, gamma: float) -> float:
    """Maximal KKT violation ``m(alpha) - M(alpha)`` recomputed from scratch."""
    X = np.asarray(X_scaled, dtype=float)
    y = _as_labels(y)
    alpha = np.asarray(alpha, dtype=float)
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    Q = np.outer(y, y) * np.exp(-gamma * d2)
    G = Q @ alpha - 1.0
    up = ((alpha < C) & (y > 0)) | ((alpha > 0) & (y < 0))
    low = ((alpha < C) & (y < 0)) | ((alpha > 0) & (y > 0))
    score = -y * G
    if not up.any() or not low.any():
        return 0.0
    return max(0.0, float(score[up].max() - score[low].min()))


def model_alphas(model: TrainedModel, X_scaled, y) -> np.ndarray:
    """Recover per-row alphas of a model trained on ``(X_scaled, y)``."""
    X = np.asarray(X_scaled, dtype=float)
    y = _as_labels(y)
    alpha = np.zeros(X.shape[0])
    used = np.zeros(model.support_vectors.shape[0], dtype=bool)
    for i, row in enumerate(X):
        hits = np.flatnonzero(np.all(model.support_vectors == row, axis=1) & ~used
                              & (np.sign(model.dual_coef) == y[i]))
        if hits.size:
            used[hits[0]] = True
            alpha[i] = abs(model.dual_coef[hits[0]])
    return alpha


# --------------------------------------------------------------------------
# Platt calibration
# --------------------------------------------------------------------------


def fit_sigmoid(f, y, max_iter: int = 100) -> tuple[float, float, bool]:
    """Platt sigmoid ``P(+1|f) = 1 / (1 + exp(a f + b))``.

    Regularised maximum likelihood with Platt's smoothed targets, solved by
    the Newton method with backtracking of Lin, Lin & Weng. Returns
    ``(a, b, degenerate)``; identical decision values give the flat 0.5 fit.
    """
    f = np.asarray(f, dtype=float)
    y = _as_labels(y)
    if f.size == 0 or np.ptp(f) == 0.0:
        return 0.0, 0.0, True
    prior1 = float(np.sum(y > 0))
    prior0 = float(np.sum(y < 0))
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(y > 0, hi, lo)
    a = 0.0
    b = np.log((prior0 + 1.0) / (prior1 + 1.0))
    sigma = 1e-12
    eps = 1e-5

    def objective(a, b):
        fab = f * a + b
        return float(np.sum(np.where(fab >= 0, t * fab + np.log1p(np.exp(-fab)),
                                     (t - 1.0) * fab + np.log1p(np.exp(fab)))))

    fval = objective(a, b)
    for _ in range(max_iter):
        fab = f * a + b
        p = np.where(fab >= 0, np.exp(-fab) / (1.0 + np.exp(-fab)), 1.0 / (1.0 + np.exp(fab)))
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + np.dot(f * f, d2)
        h22 = sigma + np.sum(d2)
        h21 = np.dot(f, d2)
        d1 = t - p
        g1 = np.dot(f, d1)
        g2 = np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= 1e-10:
            na, nb = a + step * da, b + step * db
            nf = objective(na, nb)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            break
    return float(a), float(b), False


def _calibration_folds(y: np.ndarray, groups, n_folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if groups is not None:
        groups = np.asarray(groups)
        uniq = np.unique(groups)
        if uniq.size >= 2:
            k = min(n_folds, uniq.size)
            perm = rng.permutation(uniq.size)
            fold_of_group = {uniq[p]: r % k for r, p in enumerate(perm)}
            return np.array([fold_of_group[g] for g in groups])
    folds = np.empty(y.shape[0], dtype=int)
    for cls in (-1.0, 1.0):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = np.arange(idx.size) % n_folds
    return folds


def platt_calibrate(model: TrainedModel, X_scaled, y, groups=None, n_folds: int = 5,
                    seed: int = 0, tol: float = 1e-3) -> TrainedModel:
    """Attach a Platt sigmoid fitted on out-of-fold decision values.

    The training set is split into ``n_folds`` parts (patient-grouped when
    ``groups`` is given); each part is scored by a model refitted on the
    rest at the same (gamma, C). Folds whose training part is single-class
    are scored by the full model instead.
    """
    X = np.asarray(X_scaled, dtype=float)
    y = _as_labels(y)
    if np.unique(y).size < 2:
        raise SingleClassError("calibration needs both classes")
    folds = _calibration_folds(y, groups, n_folds, seed)
    f = np.empty(y.shape[0])
    for k in np.unique(folds):
        held = folds == k
        tr = ~held
        if np.unique(y[tr]).size < 2:
            f[held] = decision_function(model, X[held])
            continue
        sub = train_svm(X[tr], y[tr], model.gamma, model.C, tol=tol)
        f[held] = decision_function(sub, X[held])
    a, b, degenerate = fit_sigmoid(f, y)
    flags = model.flags + (("flat_calibration",) if degenerate else ())
    return replace(model, platt_a=a, platt_b=b, calibrated=True, flags=flags)


def sigmoid_probability(model: TrainedModel, f) -> np.ndarray:
    z = model.platt_a * np.asarray(f, dtype=float) + model.platt_b
    # 1 / (1 + exp(z)) without overflow
    return np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))


# --------------------------------------------------------------------------
# full pipeline helpers
# --------------------------------------------------------------------------


def fit_model(X_raw, y, gamma: float, C: float, groups=None, seed: int = 0,
              feature_order: Sequence[str] = (), tol: float = 1e-3,
              calibrate: bool = True) -> TrainedModel:
    """Scaler + SVM + Platt sigmoid on raw feature rows."""
    scaler = fit_scaler(X_raw)
    Xs = scaler.transform(X_raw)
    model = train_svm(Xs, y, gamma, C, tol=tol, feature_order=feature_order)
    model = replace(model, scaler=scaler, flags=model.flags + scaler.flags)
    if calibrate:
        model = platt_calibrate(model, Xs, y, groups=groups, seed=seed, tol=tol)
    return model


def predict(model: TrainedModel, X_raw) -> tuple[np.ndarray, np.ndarray]:
    """Labels from the sign of the decision function (0 maps to +1) and
    calibrated P(SC)."""
    X = np.atleast_2d(np.asarray(X_raw, dtype=float))
    expected = len(model.feature_order) or model.n_features
    if X.shape[1] != expected:
        raise ShapeError(f"expected {expected} features, got {X.shape[1]}")
    Xs = model.scaler.transform(X) if model.scaler is not None else X
    f = decision_function(model, Xs)
    labels = np.where(f >= 0.0, 1, -1)
    return labels, sigmoid_probability(model, f)


def predict_decision(model: TrainedModel, X_raw) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X_raw, dtype=float))
    Xs = model.scaler.transform(X) if model.scaler is not None else X
    return decision_function(model, Xs)


# --------------------------------------------------------------------------
# grid search
# --------------------------------------------------------------------------


def balanced_accuracy(y_true, y_pred) -> float:
    """Mean of the per-class recalls that are defined (single-class folds
    contribute the recall of the class they contain)."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    rates = []
    for cls in (1, -1):
        m = y_true == cls
        if m.any():
            rates.append(float(np.mean(y_pred[m] == cls)))
    return float(np.mean(rates)) if rates else 0.0


def group_folds(groups, n_folds: int, seed: int, weights=None) -> np.ndarray:
    """Assign each group to one of ``n_folds`` folds.

    Groups are shuffled, then dealt largest-first to the currently lightest
    fold (by row count), so folds have similar sizes and a group never
    spans two folds.
    """
    groups = np.asarray(groups)
    uniq, inverse, counts = np.unique(groups, return_inverse=True, return_counts=True)
    if uniq.size < n_folds:
        raise FoldError(f"{uniq.size} patients cannot fill {n_folds} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(uniq.size)
    order = perm[np.argsort(-counts[perm], kind="stable")]
    load = np.zeros(n_folds)
    fold_of = np.empty(uniq.size, dtype=int)
    for g in order:
        k = int(np.argmin(load))
        fold_of[g] = k
        load[k] += counts[g]
    folds = fold_of[inverse]
    for k in range(n_folds):
        ids_in = set(groups[folds == k].tolist())
        ids_out = set(groups[folds != k].tolist())
        if ids_in & ids_out:
            raise AssertionError("patient leaked across CV folds")
    return folds


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def _cv_fold(X_raw, y, train, test, grid: HyperGrid, tol: float, max_iter: int | None):
    """Balanced accuracy for every grid point on one fold, shape (G, C)."""
    scores = np.zeros((len(grid.gammas), len(grid.cs)))
    ytr = y[train]
    yte = y[test]
    if np.unique(ytr).size < 2:
        pred = np.full(yte.shape[0], ytr[0])
        scores[:] = balanced_accuracy(yte, pred)
        return scores
    scaler = fit_scaler(X_raw[train])
    Xtr = scaler.transform(X_raw[train])
    Xte = scaler.transform(X_raw[test])
    order = canonical_order(Xtr, ytr)
    Xtr = np.ascontiguousarray(Xtr[order])
    ytr = np.ascontiguousarray(ytr[order])
    n = ytr.shape[0]
    mi = _default_max_iter(n) if max_iter is None else max_iter
    D = _sqdist(Xtr, Xtr)
    Dte = _sqdist(Xte, Xtr)
    empty = np.zeros((0, 0))
    for gi, gamma in enumerate(grid.gammas):
        K = np.exp(-gamma * D)
        Kte = np.exp(-gamma * Dte)
        alpha = np.zeros(n)
        G = -np.ones(n)
        # C ascending: the previous optimum stays feasible, so warm-start
        for ci in np.argsort(grid.cs, kind="stable"):
            alpha, G, rho, _, _ = _solve(K, empty, gamma, ytr, grid.cs[ci], tol, mi, n,
                                         alpha, G)
            f = Kte @ (alpha * ytr) - rho
            scores[gi, ci] = balanced_accuracy(yte, np.where(f >= 0.0, 1, -1))
    return scores


@dataclass
class CVResult:
    gamma: float
    C: float
    table: list[dict]  # one row per grid point: gamma, C, mean_bacc, fold scores
    folds: np.ndarray


def grid_search_cv(X_raw, y, groups, grid: HyperGrid | None = None, n_folds: int = 20,
                   seed: int = 0, tol: float = 1e-3, jobs: int = 1,
                   max_iter: int | None = None) -> CVResult:
    """Pick (gamma, C) maximising mean balanced accuracy over patient-grouped
    folds. The scaler is refitted on every fold's training part. Ties go to
    the smaller C, then the smaller gamma."""
    grid = grid or default_grid()
    X = np.asarray(X_raw, dtype=float)
    y = _as_labels(y)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("no rows for cross-validation")
    if np.unique(y).size < 2:
        raise SingleClassError("cross-validation needs both classes")
    folds = group_folds(groups, n_folds, seed)

    def run(k):
        test = folds == k
        return _cv_fold(X, y, ~test, test, grid, tol, max_iter)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            per_fold = list(ex.map(run, range(n_folds)))
    else:
        per_fold = [run(k) for k in range(n_folds)]
    scores = np.stack(per_fold)  # (folds, G, C)
    mean = scores.mean(axis=0)
    best = None
    table = []
    for gi, gamma in enumerate(grid.gammas):
        for ci, c in enumerate(grid.cs):
            table.append({"gamma": gamma, "C": c, "mean_balanced_accuracy": float(mean[gi, ci]),
                          "fold_scores": [float(s) for s in scores[:, gi, ci]]})
            key = (-mean[gi, ci], c, gamma)
            if best is None or key < best[0]:
                best = (key, gamma, c)
    return CVResult(gamma=best[1], C=best[2], table=table, folds=folds)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": "accpulse-model/1",
        "feature_order": list(model.feature_order),
        "gamma": model.gamma,
        "C": model.C,
        "bias": model.bias,
        "platt_a": model.platt_a,
        "platt_b": model.platt_b,
        "calibrated": model.calibrated,
        "flags": list(model.flags),
        "scaler": None if model.scaler is None else {
            "medians": _floats(model.scaler.medians),
            "iqrs": _floats(model.scaler.iqrs),
            "flags": list(model.scaler.flags),
        },
        "dual_coef": _floats(model.dual_coef),
        "support_vectors": _floats(model.support_vectors),
    }


def model_from_dict(d: dict) -> TrainedModel:
    sc = d.get("scaler")
    scaler = None if sc is None else Scaler(np.array(sc["medians"], dtype=float),
                                            np.array(sc["iqrs"], dtype=float),
                                            tuple(sc.get("flags", ())))
    sv = np.array(d["support_vectors"], dtype=float)
    if sv.size == 0:
        sv = sv.reshape(0, len(d["feature_order"]))
    return TrainedModel(
        support_vectors=sv,
        dual_coef=np.array(d["dual_coef"], dtype=float),
        bias=float(d["bias"]),
        gamma=float(d["gamma"]),
        C=float(d["C"]),
        scaler=scaler,
        feature_order=tuple(d["feature_order"]),
        platt_a=float(d["platt_a"]),
        platt_b=float(d["platt_b"]),
        calibrated=bool(d["calibrated"]),
        flags=tuple(d.get("flags", ())),
    )


def save_model(model: TrainedModel, path) -> None:
    # json emits repr() floats, the shortest string that parses back bit-exactly
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> TrainedModel:
    try:
        with open(path) as fh:
            d = json.load(fh)
        if d.get("format") != "accpulse-model/1":
            raise ValueError(f"unsupported format {d.get('format')!r}")
        return model_from_dict(d)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
