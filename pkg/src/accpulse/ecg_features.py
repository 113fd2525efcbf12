"""ECG features v30-v49 computed on the 0.8-30 Hz band-passed ECG.

Several literature definitions are not reproducible exactly; the following
documented surrogates are used and carry a ``surrogate`` flag:

* P_LEA  power fraction below 2 Hz
* L_min  minimum curve length (sum of |diff|) over 1 s segments
* b_S    mean absolute slope
* n_P    number of detected QRS complexes
* P_fib  power fraction in 4-7 Hz
* P_h    power fraction above 12 Hz
* MSnorm / StdSnorm  mean / std of |diff| normalised by its maximum
"""

from __future__ import annotations

import numpy as np

from .filters import ECG_FEATURE_FILTER, FilterSpec, butterworth_bandpass
from .interdep import QRS_THRESHOLD, WINDOW_S, QrsPositions, detect_qrs
from .signals import FS
from .spectrum import amplitude_spectrum, band_mask, moments, periodogram

SURROGATE_FLAGS = ("v30:surrogate", "v31:surrogate", "v32:surrogate", "v33:surrogate",
                   "v34:surrogate", "v35:surrogate", "v43:surrogate", "v44:surrogate")

AMSA_BAND_HZ = (2.0, 30.0)
HFP_CUTOFF_HZ = 12.0


def filter_ecg(e, fs: float = FS) -> np.ndarray:
    spec = ECG_FEATURE_FILTER if fs == FS else FilterSpec(0.8, 30.0, fs=fs)
    return butterworth_bandpass(e, spec)


def _power_fraction(freqs, P, total, lo, hi):
    return float(P[band_mask(freqs, lo, hi)].sum() / total)


def rhythm_power_features(e_filt, qrs: QrsPositions | None = None, fs: float = FS
                   ) -> tuple[np.ndarray, list[str]]:
    """(P_LEA, L_min, b_S, n_P, P_fib, P_h)."""
    e = np.asarray(e_filt, dtype=float)
    qrs = qrs if qrs is not None else detect_qrs(e, fs)
    n_p = float(len(qrs))
    freqs, P = periodogram(e, fs)
    pos = freqs > 0.0
    freqs, P = freqs[pos], P[pos]
    total = P.sum()
    if total <= 0.0:
        return np.array([0.0, 0.0, 0.0, n_p, 0.0, 0.0]), ["v30:zero_signal"]
    seg = int(round(fs))
    d = np.abs(np.diff(e))
    lengths = [d[s:s + seg].sum() for s in range(0, e.size - seg + 1, seg)] or [d.sum()]
    return np.array([
        _power_fraction(freqs, P, total, 0.0, 2.0),
        float(min(lengths)),
        float(d.mean() * fs),
        n_p,
        _power_fraction(freqs, P, total, 4.0, 7.0),
        float(P[freqs >= HFP_CUTOFF_HZ].sum() / total),
    ]), []


def qrs_width(envelope, p: int, threshold: float = QRS_THRESHOLD) -> int:
    """Samples the envelope stays above ``threshold`` around index ``p``."""
    lo = hi = p
    while lo - 1 >= 0 and envelope[lo - 1] > threshold:
        lo -= 1
    while hi + 1 < envelope.size and envelope[hi + 1] > threshold:
        hi += 1
    return hi - lo + 1


def qrs_morphology_features(e_filt, qrs: QrsPositions, fs: float = FS
                       ) -> tuple[np.ndarray, list[str]]:
    """meanRR, VarRR, MeanPP, StdPP, mean/std QRS width, SlopeQRS, MSnorm, StdSnorm."""
    e = np.asarray(e_filt, dtype=float)
    pos = qrs.positions
    if pos.size == 0:
        return np.zeros(9), ["v36:no_qrs"]
    flags = []
    v = np.zeros(9)
    if pos.size >= 2:
        rr = np.diff(pos) / fs
        v[0], v[1] = rr.mean(), rr.var()
    else:
        flags.append("v36:single_qrs")
    half = int(round(WINDOW_S * fs / 2.0))
    pp, slopes = [], []
    for p in pos:
        w = e[max(p - half, 0):min(p + half, e.size)]
        pp.append(np.ptp(w))
        slopes.append(np.abs(np.diff(w)).max() * fs if w.size > 1 else 0.0)
    v[2], v[3] = np.mean(pp), np.std(pp)
    widths = np.array([qrs_width(qrs.envelope, p) for p in pos]) / fs
    v[4], v[5] = widths.mean(), widths.std()
    v[6] = np.mean(slopes)
    s = np.abs(np.diff(e))
    smax = s.max() if s.size else 0.0
    if smax > 0.0:
        sn = s / smax
        v[7], v[8] = sn.mean(), sn.std()
    else:
        flags.append("v43:zero_slope")
    return v, flags


def slope_spectrum_features(e_filt, fs: float = FS) -> tuple[np.ndarray, list[str]]:
    """mean|diff|, std|diff|, kurtosis of diff^2, AMSA, HfP."""
    e = np.asarray(e_filt, dtype=float)
    flags = []
    de = np.diff(e)
    ad = np.abs(de)
    _, kurt, degenerate = moments(de * de)
    if degenerate:
        flags.append("v47:constant")
    freqs, amp = amplitude_spectrum(e, fs)
    band = band_mask(freqs, *AMSA_BAND_HZ, closed=True)
    amsa = float(np.sum(freqs[band] * amp[band]))
    freqs, P = periodogram(e, fs)
    den = P[band_mask(freqs, ECG_FEATURE_FILTER.low_hz, ECG_FEATURE_FILTER.high_hz,
                      closed=True)].sum()
    if den > 0.0:
        hfp = float(P[band_mask(freqs, HFP_CUTOFF_HZ, ECG_FEATURE_FILTER.high_hz,
                                closed=True)].sum() / den)
    else:
        hfp = 0.0
        flags.append("v49:zero_power")
    return np.array([ad.mean(), ad.std(), kurt, amsa, hfp]), flags


def ecg_features(e, qrs: QrsPositions, fs: float = FS) -> tuple[np.ndarray, list[str]]:
    """v30..v49 from a centered raw ECG snippet and its QRS positions."""
    ef = filter_ecg(e, fs)
    v1, f1 = rhythm_power_features(ef, qrs, fs)
    v2, f2 = qrs_morphology_features(ef, qrs, fs)
    v3, f3 = slope_spectrum_features(ef, fs)
    return np.concatenate([v1, v2, v3]), f1 + f2 + f3
