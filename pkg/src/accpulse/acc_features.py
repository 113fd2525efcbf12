"""ACC features v11-v29: QRS-aligned ensemble statistics and spectral
descriptors of the 4 s accelerometry signal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interdep import WINDOW_S, qrs_windows
from .signals import FS
from .spectrum import band_mask, moments, periodogram

ACC_BANDS_HZ = ((0.0, 3.0), (3.0, 6.0), (6.0, 9.0), (9.0, 12.0), (12.0, 15.0), (15.0, 18.0))


@dataclass(frozen=True)
class EnsembleAverage:
    samples: np.ndarray
    window_count: int
    fallback: bool = False


def ensemble_average(a, positions, fs: float = FS) -> EnsembleAverage:
    """Pointwise mean of the full QRS-centered windows.

    Without any full window the central window of the snippet stands in
    (``fallback=True``, ``window_count=1``).
    """
    a = np.asarray(a, dtype=float)
    W = qrs_windows(a, positions, WINDOW_S, fs)
    if W.shape[0] == 0:
        half = W.shape[1] // 2
        mid = a.size // 2
        return EnsembleAverage(a[mid - half:mid + half].copy(), 1, True)
    return EnsembleAverage(W.mean(axis=0), W.shape[0])


def ensemble_time_stats(ens: EnsembleAverage) -> tuple[np.ndarray, list[str]]:
    x = ens.samples
    flags = []
    r = float(np.sqrt(np.mean(x * x)))
    skew, kurt, degenerate = moments(x)
    if degenerate:
        flags += ["v12:constant", "v13:constant"]
    ptp = float(np.ptp(x))
    if r > 0.0:
        ratio = ptp / r
    else:
        ratio = 0.0
        flags.append("v16:zero_rms")
    return np.array([r, kurt, skew, float(np.median(x)), ptp, ratio]), flags


def acc_band_powers(a, fs: float = FS) -> np.ndarray:
    """Periodogram power in the half-open bands 0-3, 3-6, ..., 15-18 Hz."""
    freqs, P = periodogram(a, fs)
    return np.array([P[band_mask(freqs, lo, hi)].sum() for lo, hi in ACC_BANDS_HZ])


def _positive_bins(a, fs):
    freqs, P = periodogram(a, fs)
    keep = freqs > 0.0
    return freqs[keep], P[keep]


def acc_psd_stats(a, fs: float = FS) -> tuple[np.ndarray, list[str]]:
    """Mean, std, kurtosis, skewness, max and arg-max frequency of the
    periodogram over (0, fs/2]. Ties in the maximum take the lowest frequency."""
    freqs, P = _positive_bins(a, fs)
    if not P.any():
        return np.zeros(6), ["v23:zero_signal"]
    skew, kurt, degenerate = moments(P)
    flags = ["v25:flat_psd", "v26:flat_psd"] if degenerate else []
    k = int(np.argmax(P))
    return np.array([P.mean(), P.std(), kurt, skew, P[k], freqs[k]]), flags


def spectral_entropy(a, fs: float = FS) -> tuple[float, bool]:
    """Shannon entropy of the normalised periodogram over (0, fs/2], divided
    by ln(bin count) so it lies in [0, 1]."""
    _, P = _positive_bins(a, fs)
    total = P.sum()
    if total <= 0.0:
        return 0.0, True
    p = P[P > 0.0] / total
    return float(-np.sum(p * np.log(p)) / np.log(P.size)), False


def acc_features(a, positions, fs: float = FS) -> tuple[np.ndarray, list[str]]:
    """v11..v29."""
    ens = ensemble_average(a, positions, fs)
    flags = ["v11:central_window"] if ens.fallback else []
    time_stats, f = ensemble_time_stats(ens)
    flags += f
    psd, f = acc_psd_stats(a, fs)
    flags += f
    ent, degenerate = spectral_entropy(a, fs)
    if degenerate:
        flags.append("v29:zero_signal")
    return np.concatenate([time_stats, acc_band_powers(a, fs), psd, [ent]]), flags
