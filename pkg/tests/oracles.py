"""Independent reference computations used by the tests.

Everything here is written from the defining formulas with explicit sums
or enumeration (no FFTs, no shared helpers from the package), so agreement
with the package is evidence of correctness rather than of shared bugs.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------


@lru_cache(maxsize=4)
def _dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n // 2 + 1)[:, None]
    m = np.arange(n)[None, :]
    # reduce k*m mod n in integers before the trig call to keep phases exact
    phase = 2.0 * np.pi * ((k * m) % n) / n
    return np.cos(phase) - 1j * np.sin(phase)


def dft(x) -> np.ndarray:
    """One-sided DFT X_k = sum_n x_n exp(-2 pi i k n / N), k = 0..N/2."""
    x = np.asarray(x, dtype=float)
    return _dft_matrix(x.size) @ x


def freqs(n: int, fs: float) -> np.ndarray:
    return np.array([k * fs / n for k in range(n // 2 + 1)])


def band_power(x, fs: float, lo: float, hi: float, closed: bool = False) -> float:
    """sum |X_k|^2 / N over bins with lo <= f_k < hi (or <= hi)."""
    X = dft(x)
    n = len(x)
    total = 0.0
    for k, f in enumerate(freqs(n, fs)):
        inside = f >= lo - 1e-9 and (f <= hi + 1e-9 if closed else f < hi - 1e-9)
        if inside:
            total += abs(X[k]) ** 2 / n
    return total


def amsa(x, fs: float, lo: float = 2.0, hi: float = 30.0) -> float:
    X = dft(x)
    n = len(x)
    return sum(f * 2.0 * abs(X[k]) / n for k, f in enumerate(freqs(n, fs))
               if lo - 1e-9 <= f <= hi + 1e-9)


def spectral_overlap(a, e, fs: float, lo: float = 1.0, hi: float = 20.0) -> float:
    A, E = np.abs(dft(a)), np.abs(dft(e))
    idx = [k for k, f in enumerate(freqs(len(a), fs)) if lo - 1e-9 <= f <= hi + 1e-9]
    num = sum(A[k] * E[k] for k in idx)
    return num / math.sqrt(sum(A[k] ** 2 for k in idx) * sum(E[k] ** 2 for k in idx))


# --------------------------------------------------------------------------
# autocorrelation
# --------------------------------------------------------------------------


def autocorrelation(d) -> np.ndarray:
    """z(k) for k = -N/2 .. N/2-1 by the zero-padded direct sum."""
    d = np.asarray(d, dtype=float)
    n = d.size
    energy = float(np.dot(d, d))
    out = []
    for k in range(-n // 2, n // 2):
        m = abs(k)
        out.append(float(np.dot(d[: n - m], d[m:])) / energy)
    return np.array(out)


def largest_local_max(z_positive) -> tuple[int | None, float]:
    """Largest strict interior local maximum over lags 1 .. len-2."""
    best, val = None, 0.0
    for k in range(1, len(z_positive) - 1):
        if z_positive[k] > z_positive[k - 1] and z_positive[k] > z_positive[k + 1]:
            if best is None or z_positive[k] > val:
                best, val = k, z_positive[k]
    return best, val


# --------------------------------------------------------------------------
# windowed correlation
# --------------------------------------------------------------------------


def pearson(u, v) -> float:
    n = len(u)
    mu, mv = sum(u) / n, sum(v) / n
    cov = sum((a - mu) * (b - mv) for a, b in zip(u, v))
    su = math.sqrt(sum((a - mu) ** 2 for a in u))
    sv = math.sqrt(sum((b - mv) ** 2 for b in v))
    if su == 0.0 or sv == 0.0:
        return 0.0
    return cov / (su * sv)


def percentile_linear(values, q: float) -> float:
    """Order-statistic interpolation at rank q/100 * (m - 1)."""
    s = sorted(values)
    h = (len(s) - 1) * q / 100.0
    lo = math.floor(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def windowed_correlation(x, positions, half: int = 60) -> float | None:
    wins = [list(x[p - half:p + half]) for p in positions
            if p - half >= 0 and p + half <= len(x)]
    if len(wins) < 2:
        return None
    pairs = [pearson(wins[i], wins[j]) for i in range(len(wins))
             for j in range(i + 1, len(wins))]
    return percentile_linear(pairs, 75.0)


# --------------------------------------------------------------------------
# filters
# --------------------------------------------------------------------------


def butterworth_bandpass_gain(f, low: float, high: float, fs: float, order: int = 4):
    """|H(f)| of the digital Butterworth band-pass from an order-``order``
    low-pass prototype, mapped by the band-pass transform and the prewarped
    bilinear transform. Forward-backward filtering squares it."""
    f = np.asarray(f, dtype=float)
    warp = lambda x: 2.0 * fs * np.tan(np.pi * x / fs)  # noqa: E731
    w_lo, w_hi = warp(low), warp(high)
    w0sq, bw = w_lo * w_hi, w_hi - w_lo
    w = warp(f)
    with np.errstate(divide="ignore"):
        omega = np.abs((w * w - w0sq) / (w * bw))
    return 1.0 / np.sqrt(1.0 + omega ** (2 * order))


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def exact_metrics(tp: int, tn: int, fp: int, fn: int) -> dict:
    """Fractions for the rational metrics; MCC as (sign, exact square)."""
    sens = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    spec = Fraction(tn, tn + fp) if tn + fp else Fraction(0)
    f1 = Fraction(2 * tp, 2 * tp + fp + fn) if 2 * tp + fp + fn else Fraction(0)
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    num = tp * tn - fp * fn
    mcc_sq = Fraction(num * num, den) if den else Fraction(0)
    sign = (num > 0) - (num < 0) if den else 0
    return {"sensitivity": sens, "specificity": spec, "balanced_accuracy": (sens + spec) / 2,
            "f1": f1, "mcc_sign": sign, "mcc_sq": mcc_sq}


def is_correctly_rounded_sqrt(value: float, sign: int, square: Fraction) -> bool:
    """True iff ``value`` is the double nearest to sign * sqrt(square)."""
    if sign == 0:
        return value == 0.0
    if (value > 0) != (sign > 0):
        return False
    v = abs(value)
    half_ulp = Fraction(math.ulp(v)) / 2
    lo, hi = Fraction(v) - half_ulp, Fraction(v) + half_ulp
    return lo * lo <= square <= hi * hi


def auc_pairs(scores, labels) -> Fraction:
    """Concordant pairs plus half the ties over all (positive, negative) pairs."""
    pos = [s for s, y in zip(scores, labels) if y > 0]
    neg = [s for s, y in zip(scores, labels) if y <= 0]
    twice = 0
    for p in pos:
        for q in neg:
            twice += 2 if p > q else (1 if p == q else 0)
    return Fraction(twice, 2 * len(pos) * len(neg))


# --------------------------------------------------------------------------
# SVM
# --------------------------------------------------------------------------


def rbf(u, v, gamma: float) -> float:
    return math.exp(-gamma * sum((a - b) ** 2 for a, b in zip(u, v)))


def kkt_gap(X, y, alpha, C: float, gamma: float) -> float:
    """m(alpha) - M(alpha) of the C-SVC dual from explicit double sums."""
    n = len(y)
    grad = [sum(y[i] * y[j] * rbf(X[i], X[j], gamma) * alpha[j] for j in range(n)) - 1.0
            for i in range(n)]
    up = [-y[t] * grad[t] for t in range(n)
          if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0)]
    low = [-y[t] * grad[t] for t in range(n)
           if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0)]
    if not up or not low:
        return 0.0
    return max(0.0, max(up) - min(low))


def two_point_solution(x1, x2, gamma: float, C: float):
    """Closed-form dual for one positive point x1 and one negative x2.

    Both alphas are equal; the objective 2a - a^2 (1 - k) peaks at
    a = 1 / (1 - k), clipped to C. The bias is 0 by symmetry.
    """
    k = rbf(x1, x2, gamma)
    a = min(1.0 / (1.0 - k), C)
    return a, lambda x: a * (rbf(x1, x, gamma) - rbf(x2, x, gamma))
