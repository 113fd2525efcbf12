"""The 49-value feature vector of a snippet and the named feature sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acc_features import acc_features
from .ecg_features import SURROGATE_FLAGS, ecg_features
from .interdep import detect_qrs, interdep_features
from .signals import FS, Snippet

N_FEATURES = 49
FEATURE_NAMES = tuple(f"v{k}" for k in range(1, N_FEATURES + 1))

_ACC_NUMBERS = {1, 3, 5, 6, 7, 8, *range(10, 30)}
ACC_FEATURES = tuple(f"v{k}" for k in range(1, 50) if k in _ACC_NUMBERS)
ECG_FEATURES = tuple(f"v{k}" for k in range(1, 50) if k not in _ACC_NUMBERS)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def compute_features(acc, ecg, fs: float = FS) -> FeatureVector:
    """All 49 features for a centered ACC/ECG pair."""
    acc = np.asarray(acc, dtype=float)
    ecg = np.asarray(ecg, dtype=float)
    qrs = detect_qrs(ecg, fs)
    v_int, f_int = interdep_features(acc, ecg, fs, qrs=qrs)
    v_acc, f_acc = acc_features(acc, qrs.positions, fs)
    v_ecg, f_ecg = ecg_features(ecg, qrs, fs)
    values = np.concatenate([v_int, v_acc, v_ecg])
    assert values.shape == (N_FEATURES,)
    if not np.all(np.isfinite(values)):
        bad = [FEATURE_NAMES[i] for i in np.flatnonzero(~np.isfinite(values))]
        raise AssertionError(f"non-finite features {bad}")
    return FeatureVector(values, tuple(f_int + f_acc + f_ecg) + SURROGATE_FLAGS)


def feature_vector(snippet: Snippet) -> FeatureVector:
    return compute_features(snippet.acc, snippet.ecg, snippet.fs)


def resolve_feature_set(spec: str | None) -> tuple[str, ...]:
    """``all``, ``ecg-only``, ``acc-only`` or a comma-separated list of names."""
    if spec is None or spec == "all":
        return FEATURE_NAMES
    if spec == "ecg-only":
        return ECG_FEATURES
    if spec == "acc-only":
        return ACC_FEATURES
    names = tuple(s.strip() for s in spec.split(",") if s.strip())
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if unknown or not names:
        raise ValueError(f"unknown feature names: {unknown or spec!r}")
    if len(set(names)) != len(names):
        raise ValueError("duplicate feature names")
    return names


def feature_indices(names) -> np.ndarray:
    return np.array([FEATURE_NAMES.index(n) for n in names], dtype=int)
