"""Periodogram helpers and population moments used by several feature groups."""

from __future__ import annotations

import numpy as np

_FREQ_EPS = 1e-9


def periodogram(x, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided ``|X_k|^2 / N`` on the rfft grid (bins are not doubled)."""
    x = np.asarray(x, dtype=float)
    X = np.fft.rfft(x)
    return np.fft.rfftfreq(x.size, 1.0 / fs), (X.real ** 2 + X.imag ** 2) / x.size


def amplitude_spectrum(x, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-sided amplitude ``2|X_k| / N``; a unit sine on a bin reads 1."""
    x = np.asarray(x, dtype=float)
    return np.fft.rfftfreq(x.size, 1.0 / fs), 2.0 * np.abs(np.fft.rfft(x)) / x.size


def band_mask(freqs, lo: float, hi: float, closed: bool = False) -> np.ndarray:
    """Bins in ``[lo, hi)``, or ``[lo, hi]`` with ``closed=True``."""
    upper = freqs <= hi + _FREQ_EPS if closed else freqs < hi - _FREQ_EPS
    return (freqs >= lo - _FREQ_EPS) & upper


def moments(x) -> tuple[float, float, bool]:
    """Population skewness and (non-excess) kurtosis.

    Returns ``(skewness, kurtosis, degenerate)``; a constant input (variance
    below round-off of its magnitude) gives zeros and ``degenerate=True``.
    """
    x = np.asarray(x, dtype=float)
    scale = np.max(np.abs(x)) if x.size else 0.0
    dev = x - x.mean()
    m2 = np.mean(dev ** 2)
    if m2 <= (1e-12 * scale) ** 2 or m2 == 0.0:
        return 0.0, 0.0, True
    m3 = np.mean(dev ** 3)
    m4 = np.mean(dev ** 4)
    return float(m3 / m2 ** 1.5), float(m4 / m2 ** 2), False
