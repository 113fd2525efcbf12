"""Amplitude, rhythmicity and ACC/ECG coupling features (v1-v10), plus the
slope-based QRS locator they share with the ECG feature group."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignal
from .filters import FilterSpec, butterworth_bandpass
from .signals import FS
from .spectrum import band_mask

QRS_THRESHOLD = 0.33
QRS_MIN_SEPARATION_S = 0.2
ROLLING_MEAN_S = 0.1
WINDOW_S = 0.48
OVERLAP_BAND_HZ = (1.0, 20.0)
RATIO_GUARD = 1e-6


# --------------------------------------------------------------------------
# autocorrelation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AutocorrResult:
    """Normalised zero-padded autocorrelation.

    ``z`` holds lags ``-N/2 .. N/2-1``; ``lag`` is the location of the largest
    nontrivial local maximum (``None`` when z has none on k > 0) and
    ``value`` its height (0 when absent).
    """

    z: np.ndarray
    lag: int | None
    value: float
    positive: np.ndarray  # lags 0 .. N-1, used for evaluations past N/2

    def at(self, k: int) -> float:
        k = abs(int(k))
        return float(self.positive[k]) if k < self.positive.size else 0.0


def autocorrelation(d) -> AutocorrResult:
    d = np.asarray(d, dtype=float)
    n = d.size
    energy = float(np.dot(d, d))
    if energy == 0.0:
        raise DegenerateSignal("autocorrelation of an all-zero signal")
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(d, nfft)
    r = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, nfft)[:n] / energy
    r[0] = 1.0
    half = n // 2
    z = np.concatenate([r[half:0:-1], r[:half]])
    zp = r[:half]
    k = np.arange(1, half - 1)
    is_max = (zp[k] > zp[k - 1]) & (zp[k] > zp[k + 1])
    if not is_max.any():
        return AutocorrResult(z, None, 0.0, r)
    cand = k[is_max]
    best = cand[np.argmax(zp[cand])]  # argmax keeps the smallest lag on ties
    return AutocorrResult(z, int(best), float(zp[best]), r)


def rms(d) -> float:
    d = np.asarray(d, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


def spectral_overlap(a, e, fs: float = FS) -> float:
    """Cosine similarity of |FFT| magnitudes restricted to 1-20 Hz (inclusive)."""
    a = np.asarray(a, dtype=float)
    freqs = np.fft.rfftfreq(a.size, 1.0 / fs)
    band = band_mask(freqs, *OVERLAP_BAND_HZ, closed=True)
    sa = np.abs(np.fft.rfft(a))[band]
    se = np.abs(np.fft.rfft(np.asarray(e, dtype=float)))[band]
    denom = np.sqrt(np.dot(sa, sa) * np.dot(se, se))
    if denom == 0.0:
        raise DegenerateSignal("band-limited spectrum is identically zero")
    return float(np.dot(sa, se) / denom)


def coupling_at_ecg_lag(z_a: AutocorrResult, z_e: AutocorrResult,
                        fs: float = FS) -> tuple[float, float, bool]:
    """ACC autocorrelation and its mean curvature at the ECG's best lag.

    Returns ``(v6, v7, fallback)``; without an ECG local maximum both are 0.
    """
    lag = z_e.lag
    if lag is None:
        return 0.0, 0.0, True
    v6 = z_a.at(lag)
    curv = [(z_a.at(n + 1) - 2.0 * z_a.at(n) + z_a.at(n - 1)) * fs * fs
            for n in range(lag - 2, lag + 3)]
    return v6, float(np.mean(curv)), False


# --------------------------------------------------------------------------
# QRS localisation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QrsPositions:
    """Detected QRS sample indices and the normalised slope envelope
    (length N-1, index i describes the step from sample i to i+1)."""

    positions: np.ndarray
    envelope: np.ndarray

    def __len__(self) -> int:
        return int(self.positions.size)


def rolling_mean(x, width: int) -> np.ndarray:
    """Centered moving average whose window shrinks at the edges."""
    x = np.asarray(x, dtype=float)
    n = x.size
    half = width // 2
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    return (c[hi] - c[lo]) / (hi - lo)


def slope_envelope(e, fs: float = FS) -> np.ndarray:
    filt = butterworth_bandpass(e, FilterSpec(0.5, 30.0, fs=fs))
    env = rolling_mean(np.diff(filt) ** 2, int(round(ROLLING_MEAN_S * fs)))
    peak = env.max() if env.size else 0.0
    if not peak > 0.0:
        return np.zeros_like(env)
    return env / peak


def merge_candidates(candidates, values, min_separation: int) -> np.ndarray:
    """Keep the largest candidate of any group closer than ``min_separation``.

    Greedy by descending value (earlier index on ties): a candidate is kept
    only if it is at least ``min_separation`` from every kept one.
    """
    order = sorted(range(len(candidates)), key=lambda i: (-values[i], candidates[i]))
    kept: list[int] = []
    for i in order:
        p = candidates[i]
        if all(abs(p - q) >= min_separation for q in kept):
            kept.append(p)
    return np.array(sorted(kept), dtype=int)


def detect_qrs(e, fs: float = FS) -> QrsPositions:
    """Locate QRS complexes by their steep slopes.

    0.5-30 Hz band-pass, squared first difference, 0.1 s rolling mean,
    normalisation by the maximum, interior local maxima above 0.33, then
    merging of candidates closer than 0.2 s.
    """
    env = slope_envelope(e, fs)
    if env.size < 3 or not env.any():
        return QrsPositions(np.zeros(0, dtype=int), env)
    mid = env[1:-1]
    is_peak = (mid > env[:-2]) & (mid >= env[2:]) & (mid > QRS_THRESHOLD)
    cand = np.flatnonzero(is_peak) + 1
    pos = merge_candidates(cand.tolist(), env[cand].tolist(),
                           int(round(QRS_MIN_SEPARATION_S * fs)))
    return QrsPositions(pos, env)


# --------------------------------------------------------------------------
# QRS-anchored windows
# --------------------------------------------------------------------------


def qrs_windows(x, positions, width_s: float = WINDOW_S, fs: float = FS) -> np.ndarray:
    """Stack of full windows centered at each position; partial ones are dropped."""
    x = np.asarray(x, dtype=float)
    half = int(round(width_s * fs / 2.0))
    rows = [x[p - half:p + half] for p in positions if p - half >= 0 and p + half <= x.size]
    if not rows:
        return np.zeros((0, 2 * half))
    return np.vstack(rows)


def pairwise_pearson(W) -> np.ndarray:
    """Pearson correlation of every unordered row pair (zero-variance rows give 0)."""
    W = np.asarray(W, dtype=float)
    Wc = W - W.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", Wc, Wc))
    ok = norms > 0.0
    U = np.zeros_like(Wc)
    U[ok] = Wc[ok] / norms[ok, None]
    C = U @ U.T
    iu = np.triu_indices(W.shape[0], k=1)
    return np.clip(C[iu], -1.0, 1.0)


def windowed_correlation(x, positions, width_s: float = WINDOW_S,
                         fs: float = FS) -> tuple[float, bool]:
    """75th percentile of pairwise window correlations; ``(0, True)`` when
    fewer than two full windows exist."""
    W = qrs_windows(x, positions, width_s, fs)
    if W.shape[0] < 2:
        return 0.0, True
    return float(np.percentile(pairwise_pearson(W), 75.0)), False


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------


def interdep_features(a, e, fs: float = FS, qrs: QrsPositions | None = None
                      ) -> tuple[np.ndarray, list[str]]:
    """v1..v10 for one centered snippet, with fallback flags."""
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    flags: list[str] = []
    v = np.zeros(10)
    v[0] = rms(a)
    v[1] = rms(e)

    try:
        z_a = autocorrelation(a)
    except DegenerateSignal:
        z_a = None
        flags.append("v3:degenerate")
    try:
        z_e = autocorrelation(e)
    except DegenerateSignal:
        z_e = None
        flags.append("v4:degenerate")
    if z_a is not None:
        v[2] = z_a.value
        if z_a.lag is None:
            flags.append("v3:no_local_max")
    if z_e is not None:
        v[3] = z_e.value
        if z_e.lag is None:
            flags.append("v4:no_local_max")

    try:
        v[4] = spectral_overlap(a, e, fs)
    except DegenerateSignal:
        flags.append("v5:degenerate")

    if z_a is not None and z_e is not None:
        v[5], v[6], fb = coupling_at_ecg_lag(z_a, z_e, fs)
        if fb:
            flags.append("v6:no_ecg_lag")
    else:
        flags.append("v6:degenerate")

    qrs = qrs if qrs is not None else detect_qrs(e, fs)
    v[7], fb8 = windowed_correlation(a, qrs.positions, fs=fs)
    v[8], fb9 = windowed_correlation(e, qrs.positions, fs=fs)
    if fb8 or fb9:
        flags.append("v8:few_windows")
    if v[8] < RATIO_GUARD:
        v[9] = 0.0
        flags.append("v10:ratio_guard")
    else:
        v[9] = v[7] / v[8]
    return v, flags
