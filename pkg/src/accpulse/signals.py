"""Recordings, snippets, resampling and the artifact prefilter."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateInput

FS = 250.0
SNIPPET_SECONDS = 4.0
HOP_SECONDS = 2.0
N_SAMPLES = int(FS * SNIPPET_SECONDS)

SC = 1
AR = -1

RHYTHMS = ("ASY", "VF", "VT", "ORG")

# prefilter thresholds
MAX_ACC = 20.0
MAX_ECG_MV = 2.5
MAX_ACC_PEAKEDNESS = 25.0
MAX_ECG_PEAKEDNESS = 35.0

# boundary-tolerance used for interval arithmetic in seconds
_EPS = 1e-9


@dataclass(frozen=True)
class Recording:
    """One case: ECG (mV) and ACC (device units), each with its own sample
    rate and start time, plus annotation intervals in seconds."""

    patient_id: str
    ecg: np.ndarray
    fs_ecg: float
    acc: np.ndarray
    fs_acc: float
    compression_free: tuple[tuple[float, float], ...] = ()
    circulation: tuple[tuple[float, float], ...] = ()
    rhythm: tuple[tuple[float, float, str], ...] = ()
    ecg_t0: float = 0.0
    acc_t0: float = 0.0

    def __post_init__(self):
        for name in ("compression_free", "circulation"):
            _check_intervals(name, getattr(self, name))
        _check_intervals("rhythm", [(s, e) for s, e, _ in self.rhythm])
        for _, _, r in self.rhythm:
            if r not in RHYTHMS:
                raise ValueError(f"unknown rhythm {r!r}")

    @property
    def joint_support(self) -> tuple[float, float]:
        start = max(self.ecg_t0, self.acc_t0)
        end = min(self.ecg_t0 + len(self.ecg) / self.fs_ecg,
                  self.acc_t0 + len(self.acc) / self.fs_acc)
        return start, end


def _check_intervals(name, intervals) -> None:
    prev_end = -np.inf
    for start, end in intervals:
        if not end > start:
            raise ValueError(f"{name}: interval ({start}, {end}) has end <= start")
        if start < prev_end - _EPS:
            raise ValueError(f"{name}: intervals must be sorted and non-overlapping")
        prev_end = end


@dataclass(frozen=True)
class Snippet:
    acc: np.ndarray
    ecg: np.ndarray
    label: int
    patient_id: str
    start_time_s: float
    rhythm: str | None = None
    pause_index: int = 0
    fs: float = field(default=FS, compare=False)


def resample(series, fs_in: float, fs_out: float = FS, t0: float = 0.0,
             grid_t0: float | None = None, n_out: int | None = None) -> np.ndarray:
    """Linearly interpolate a uniformly sampled series onto a uniform grid.

    By default the output grid starts at the series' first sample and covers
    the series' duration ``len/fs_in``; samples past the last input sample
    hold its value. ``grid_t0`` and ``n_out`` place the grid explicitly.
    """
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise DegenerateInput("cannot resample an empty series")
    if fs_in <= 0 or fs_out <= 0:
        raise ValueError("sample rates must be positive")
    if grid_t0 is None:
        grid_t0 = t0
    if n_out is None:
        n_out = int(np.floor(x.size * fs_out / fs_in + 1e-9))
    if fs_in == fs_out and grid_t0 == t0 and n_out == x.size:
        return x.copy()
    t_in = t0 + np.arange(x.size) / fs_in
    t_out = grid_t0 + np.arange(n_out) / fs_out
    return np.interp(t_out, t_in, x)


def center(signal) -> np.ndarray:
    x = np.asarray(signal, dtype=float)
    return x - x.mean()


class AlignedRecording(NamedTuple):
    ecg: np.ndarray
    acc: np.ndarray
    t0: float
    fs: float


def align(recording: Recording, fs: float = FS) -> AlignedRecording:
    """Resample both channels onto one grid spanning their joint support."""
    start, end = recording.joint_support
    n = max(0, int(np.floor((end - start) * fs + 1e-9)))
    if n == 0:
        return AlignedRecording(np.zeros(0), np.zeros(0), start, fs)
    ecg = resample(recording.ecg, recording.fs_ecg, fs, t0=recording.ecg_t0,
                   grid_t0=start, n_out=n)
    acc = resample(recording.acc, recording.fs_acc, fs, t0=recording.acc_t0,
                   grid_t0=start, n_out=n)
    return AlignedRecording(ecg, acc, start, fs)


def snippet_starts(start: float, end: float, length: float = SNIPPET_SECONDS,
                   hop: float = HOP_SECONDS) -> list[float]:
    """Start times of fully contained windows: floor((L - length)/hop) + 1."""
    span = end - start
    if span < length - _EPS:
        return []
    count = int(np.floor((span - length) / hop + 1e-9)) + 1
    return [start + k * hop for k in range(count)]


def _overlap(a0, a1, intervals) -> float:
    total = 0.0
    for s, e, *_ in intervals:
        total += max(0.0, min(a1, e) - max(a0, s))
    return total


def label_for(start: float, end: float, circulation) -> int:
    """SC when circulation covers more than half the span; ties go to AR."""
    return SC if _overlap(start, end, circulation) > (end - start) / 2.0 + _EPS else AR


def rhythm_for(start: float, end: float, rhythm_intervals) -> str | None:
    best, best_overlap = None, 0.0
    for s, e, r in rhythm_intervals:
        ov = max(0.0, min(end, e) - max(start, s))
        if ov > best_overlap:
            best, best_overlap = r, ov
    return best if best_overlap > (end - start) / 2.0 else None


def extract_snippets(recording: Recording, aligned: AlignedRecording | None = None
                     ) -> list[Snippet]:
    """Cut centered 4 s snippets every 2 s from each compression-free interval.

    Intervals are clipped to the joint ECG/ACC support first, so no snippet
    reaches outside it.
    """
    aligned = aligned or align(recording)
    start_s, end_s = recording.joint_support
    fs = aligned.fs
    n_total = aligned.ecg.size
    out = []
    for pause_index, (p0, p1) in enumerate(recording.compression_free):
        lo, hi = max(p0, start_s), min(p1, end_s)
        for t in snippet_starts(lo, hi):
            i0 = int(round((t - aligned.t0) * fs))
            i0 = max(i0, 0)
            i1 = i0 + N_SAMPLES
            if i1 > n_total:
                continue
            out.append(Snippet(
                acc=center(aligned.acc[i0:i1]),
                ecg=center(aligned.ecg[i0:i1]),
                label=label_for(t, t + SNIPPET_SECONDS, recording.circulation),
                patient_id=recording.patient_id,
                start_time_s=float(t),
                rhythm=rhythm_for(t, t + SNIPPET_SECONDS, recording.rhythm),
                pause_index=pause_index,
                fs=fs,
            ))
    return out


class PrefilterResult(NamedTuple):
    accepted: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPT = PrefilterResult(True)


def prefilter(snippet: Snippet | None = None, *, acc: Sequence[float] | None = None,
              ecg: Sequence[float] | None = None) -> PrefilterResult:
    """Reject snippets with high-amplitude noise or sharply peaked artifacts.

    Rules are checked in order and the first violated one names the reason:
    ``acc_amplitude``, ``ecg_amplitude``, ``degenerate_signal`` (an all-zero
    channel), ``acc_peakedness``, ``ecg_peakedness``.
    """
    a = np.abs(np.asarray(snippet.acc if acc is None else acc, dtype=float))
    e = np.abs(np.asarray(snippet.ecg if ecg is None else ecg, dtype=float))
    amax, emax = a.max(), e.max()
    if amax >= MAX_ACC:
        return PrefilterResult(False, "acc_amplitude")
    if emax >= MAX_ECG_MV:
        return PrefilterResult(False, "ecg_amplitude")
    amean, emean = a.mean(), e.mean()
    if amean == 0.0 or emean == 0.0:
        return PrefilterResult(False, "degenerate_signal")
    if amax / amean >= MAX_ACC_PEAKEDNESS:
        return PrefilterResult(False, "acc_peakedness")
    if emax / emean >= MAX_ECG_PEAKEDNESS:
        return PrefilterResult(False, "ecg_peakedness")
    return ACCEPT
