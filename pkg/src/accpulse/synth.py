"""Synthetic ECG/ACC recordings with known circulation ground truth.

ECG beats are narrow symmetric biphasic pulses (difference of Gaussians)
plus a broad T wave. When the heart is mechanically coupled every beat is
followed, after a fixed per-case delay of 20-80 ms, by a damped 15 Hz
oscillation in the ACC channel. Decoupled regimes keep the ACC free of any
beat-locked component. Compression periods separate the pauses and carry
large periodic ACC/ECG artifacts, as a real record would.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import ConfigError
from .signals import Recording

ORG_COUPLED = "ORG-coupled"
ORG_DECOUPLED = "ORG-decoupled"
VF = "VF"
ASY = "ASY"
ARRHYTHMIC_COUPLED = "arrhythmic-coupled"

REGIMES = (ORG_COUPLED, ORG_DECOUPLED, VF, ASY, ARRHYTHMIC_COUPLED)
SC_REGIMES = frozenset({ORG_COUPLED, ARRHYTHMIC_COUPLED})
ORGANIZED = frozenset({ORG_COUPLED, ORG_DECOUPLED, ARRHYTHMIC_COUPLED})
RHYTHM_OF = {ORG_COUPLED: "ORG", ORG_DECOUPLED: "ORG", VF: "VF", ASY: "ASY",
             ARRHYTHMIC_COUPLED: "ORG"}

ACC_RING_HZ = 15.0
ACC_RING_TAU_S = 0.06
ACC_RING_LEN_S = 0.3
COMPRESSION_HZ = 1.8


@dataclass(frozen=True)
class Segment:
    regime: str
    duration_s: float


@dataclass(frozen=True)
class SynthParams:
    """Generator settings for one case.

    ``pauses`` lists the compression-free intervals in order, each as a
    sequence of regime segments (several segments model a transition inside
    one pause). Every pause is preceded and the record is closed by
    ``compression_s`` seconds of chest compressions.
    """

    pauses: tuple[tuple[Segment, ...], ...] = ((Segment(ORG_COUPLED, 20.0),),)
    compression_s: float = 10.0
    heart_rate_bpm: tuple[float, float] = (50.0, 110.0)
    coupling_gain: float = 1.0
    acc_noise_sigma: float = 0.05
    ecg_noise_sigma: float = 0.02
    artifact_rate: float = 0.0
    fs_ecg: float = 500.0
    fs_acc: float = 250.0
    patient_id: str = "synth"
    seed: int = 0

    def __post_init__(self):
        if self.acc_noise_sigma < 0 or self.ecg_noise_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        lo, hi = self.heart_rate_bpm
        if not 20.0 <= lo <= hi <= 220.0:
            raise ValueError("heart rate range must lie within [20, 220] bpm")
        if self.coupling_gain < 0 or self.artifact_rate < 0 or self.compression_s < 0:
            raise ValueError("coupling_gain, artifact_rate and compression_s must be >= 0")
        if self.coupling_gain == 0 and any(seg.regime in SC_REGIMES
                                           for pause in self.pauses for seg in pause):
            raise ValueError("circulation regimes need coupling_gain > 0")
        for pause in self.pauses:
            if not pause:
                raise ValueError("a pause needs at least one segment")
            for seg in pause:
                if seg.regime not in REGIMES:
                    raise ValueError(f"unknown regime {seg.regime!r}")
                if seg.duration_s <= 0:
                    raise ValueError("segment durations must be positive")


@dataclass
class Truth:
    r_times: np.ndarray  # every generated beat, seconds
    coupled_r_times: np.ndarray  # beats that produced an ACC response
    segments: list[tuple[float, float, str, int]] = field(default_factory=list)
    acc_delay_s: float = 0.0
    heart_rate_bpm: float = 0.0


def qrs_template(t, amplitude: float = 1.0) -> np.ndarray:
    """Symmetric biphasic pulse centered at t = 0."""
    return amplitude * (np.exp(-0.5 * (t / 0.010) ** 2) - 0.3 * np.exp(-0.5 * (t / 0.025) ** 2))


def acc_impulse(t) -> np.ndarray:
    """Damped 15 Hz ring starting at t = 0, zero elsewhere."""
    t = np.asarray(t, dtype=float)
    inside = (t >= 0.0) & (t < ACC_RING_LEN_S)
    out = np.zeros_like(t)
    ti = t[inside]
    out[inside] = np.exp(-ti / ACC_RING_TAU_S) * np.sin(2.0 * np.pi * ACC_RING_HZ * ti)
    return out


def _timeline(params: SynthParams):
    """(start, end, regime, in_pause, pause_index) spans covering the record."""
    spans = []
    t = 0.0
    last = params.pauses[0][0].regime if params.pauses else ASY
    for k, pause in enumerate(params.pauses):
        spans.append((t, t + params.compression_s, pause[0].regime, False, -1))
        t += params.compression_s
        for seg in pause:
            spans.append((t, t + seg.duration_s, seg.regime, True, k))
            t += seg.duration_s
            last = seg.regime
    spans.append((t, t + params.compression_s, last, False, -1))
    t += params.compression_s
    return [s for s in spans if s[1] > s[0]], t


def _beat_times(rng, spans, base_rr):
    """R times over all organised spans; arrhythmic spans draw log-normal RR."""
    beats, coupled = [], []
    t = rng.uniform(0.0, base_rr)
    total = spans[-1][1]
    while t < total:
        span = next((s for s in spans if s[0] <= t < s[1]), None)
        regime = span[2]
        if regime in ORGANIZED:
            beats.append(t)
            if regime in SC_REGIMES:
                coupled.append(t)
        if regime == ARRHYTHMIC_COUPLED:
            rr = base_rr * float(np.exp(rng.normal(0.0, 0.3)))
        else:
            rr = base_rr * (1.0 + 0.005 * rng.standard_normal())
        t += float(np.clip(rr, 0.3, 2.5))
    return np.array(beats), np.array(coupled)


def _place(out, fs, times, kernel, support):
    """Add ``kernel(t - t_k)`` for every event time, evaluated on ``support``."""
    lo, hi = support
    for tk, amp in times:
        i0 = max(int(np.floor((tk + lo) * fs)), 0)
        i1 = min(int(np.ceil((tk + hi) * fs)) + 1, out.size)
        if i1 <= i0:
            continue
        t = np.arange(i0, i1) / fs - tk
        out[i0:i1] += amp * kernel(t)


def generate_case(params: SynthParams) -> tuple[Recording, Truth]:
    """Deterministic synthetic case for ``params`` (same params, same bits)."""
    rng = np.random.default_rng(params.seed)
    spans, total = _timeline(params)
    hr = rng.uniform(*params.heart_rate_bpm)
    base_rr = 60.0 / hr
    beat_amp = rng.uniform(0.6, 1.2)
    delay = rng.uniform(0.02, 0.08)
    r_times, coupled = _beat_times(rng, spans, base_rr)

    fe, fa = params.fs_ecg, params.fs_acc
    n_e = int(round(total * fe))
    n_a = int(round(total * fa))
    te = np.arange(n_e) / fe
    ta = np.arange(n_a) / fa

    # ECG: beats, T waves, regime-specific background, wander and noise
    ecg = np.zeros(n_e)
    amps = beat_amp * (1.0 + 0.05 * rng.standard_normal(r_times.size))
    _place(ecg, fe, zip(r_times, amps), qrs_template, (-0.1, 0.1))
    t_off = 0.25 * np.sqrt(base_rr)
    _place(ecg, fe, zip(r_times + t_off, 0.15 * amps),
           lambda t: np.exp(-0.5 * (t / 0.04) ** 2), (-0.16, 0.16))
    vf = sps.sosfilt(sps.butter(4, [4.0, 7.0], btype="bandpass", output="sos", fs=fe),
                     rng.standard_normal(n_e))
    vf *= 0.3 * beat_amp / max(np.std(vf), 1e-12)
    drift = np.cumsum(rng.standard_normal(n_e)) / np.sqrt(fe)
    drift = 0.01 * (drift - np.convolve(drift, np.ones(int(fe)) / fe, mode="same"))
    for start, end, regime, _, _ in spans:
        m = (te >= start) & (te < end)
        if regime == VF:
            ecg[m] += vf[m]
        elif regime == ASY:
            ecg[m] += drift[m]
    ecg += 0.05 * np.sin(2.0 * np.pi * 0.3 * te + rng.uniform(0, 2 * np.pi))
    ecg += params.ecg_noise_sigma * rng.standard_normal(n_e)

    # ACC: beat-locked ring for coupled beats only, plus white noise
    acc = np.zeros(n_a)
    ring_amp = params.coupling_gain * (1.0 + 0.1 * rng.standard_normal(coupled.size))
    _place(acc, fa, zip(coupled + delay, ring_amp), acc_impulse, (0.0, ACC_RING_LEN_S))
    acc += params.acc_noise_sigma * rng.standard_normal(n_a)

    # compressions
    for start, end, _, in_pause, _ in spans:
        if in_pause:
            continue
        ma = (ta >= start) & (ta < end)
        acc[ma] += 40.0 * np.sin(2.0 * np.pi * COMPRESSION_HZ * (ta[ma] - start))
        me = (te >= start) & (te < end)
        ecg[me] += 0.8 * np.sin(2.0 * np.pi * COMPRESSION_HZ * (te[me] - start))

    # sharp ACC spike artifacts
    n_spikes = rng.poisson(params.artifact_rate * total / 60.0)
    for tk in np.sort(rng.uniform(0.0, total, n_spikes)):
        _place(acc, fa, [(tk, rng.uniform(3.0, 8.0))],
                lambda t: np.maximum(0.0, 1.0 - np.abs(t) / 0.012), (-0.012, 0.012))

    pauses, circulation, rhythm, segments = [], [], [], []
    for start, end, regime, in_pause, k in spans:
        if not in_pause:
            continue
        label = 1 if regime in SC_REGIMES else -1
        segments.append((start, end, regime, label))
        if pauses and pauses[-1][2] == k:
            pauses[-1] = (pauses[-1][0], end, k)
        else:
            pauses.append((start, end, k))
        if label == 1:
            _append_merged(circulation, start, end)
        if rhythm and rhythm[-1][2] == RHYTHM_OF[regime] and abs(rhythm[-1][1] - start) < 1e-9:
            rhythm[-1] = (rhythm[-1][0], end, RHYTHM_OF[regime])
        else:
            rhythm.append((start, end, RHYTHM_OF[regime]))

    rec = Recording(
        patient_id=params.patient_id,
        ecg=ecg, fs_ecg=fe, acc=acc, fs_acc=fa,
        compression_free=tuple((s, e) for s, e, _ in pauses),
        circulation=tuple(circulation),
        rhythm=tuple(rhythm),
    )
    truth = Truth(r_times=r_times, coupled_r_times=coupled, segments=segments,
                  acc_delay_s=delay, heart_rate_bpm=hr)
    return rec, truth


def _append_merged(intervals, start, end):
    if intervals and abs(intervals[-1][1] - start) < 1e-9:
        intervals[-1] = (intervals[-1][0], end)
    else:
        intervals.append((start, end))


# --------------------------------------------------------------------------
# snippet-level helpers used by tests and the acceptance suite
# --------------------------------------------------------------------------


def synth_snippet(regime: str, seed: int, fs: float = 250.0, seconds: float = 4.0,
                  acc_noise_sigma: float = 0.05, ecg_noise_sigma: float = 0.02,
                  coupling_gain: float = 1.0, heart_rate_bpm=(50.0, 110.0)):
    """One centered 4 s ACC/ECG pair of a single regime plus its R times.

    Returns ``(acc, ecg, r_times_in_snippet_seconds)``.
    """
    params = SynthParams(pauses=((Segment(regime, seconds + 4.0),),), compression_s=2.0,
                         fs_ecg=fs, fs_acc=fs, seed=seed, coupling_gain=coupling_gain,
                         acc_noise_sigma=acc_noise_sigma, ecg_noise_sigma=ecg_noise_sigma,
                         heart_rate_bpm=tuple(heart_rate_bpm))
    rec, truth = generate_case(params)
    t0 = params.compression_s + 2.0
    i0 = int(round(t0 * fs))
    n = int(round(seconds * fs))
    acc = rec.acc[i0:i0 + n]
    ecg = rec.ecg[i0:i0 + n]
    r = truth.r_times[(truth.r_times >= t0 - 1.0) & (truth.r_times < t0 + seconds + 1.0)] - t0
    return acc - acc.mean(), ecg - ecg.mean(), r


# --------------------------------------------------------------------------
# corpora
# --------------------------------------------------------------------------

CORPUS_DEFAULTS = {
    "seed": 0,
    "n_cases": 20,
    "regime_mix": {ORG_COUPLED: 0.5, ORG_DECOUPLED: 0.5},
    "pauses_per_case": [2, 4],
    "pause_seconds": [10.0, 30.0],
    "compression_s": 10.0,
    "heart_rate_bpm": [50.0, 110.0],
    "coupling_gain": 1.0,
    "acc_noise_sigma": 0.05,
    "ecg_noise_sigma": 0.02,
    "artifact_rate": 0.0,
    "fs_ecg": 500.0,
    "fs_acc": 250.0,
}


def _range(value, name):
    """A scalar or a [lo, hi] pair, returned as (lo, hi)."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value), float(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 \
            and all(isinstance(v, (int, float)) for v in value) and value[0] <= value[1]:
        return float(value[0]), float(value[1])
    raise ConfigError(f"{name}: expected a number or an ascending [lo, hi] pair")


def _allocate(mix: dict, n: int) -> list[str]:
    """Regime per case, proportional to the mix weights (largest remainder)."""
    names = sorted(mix)
    w = np.array([float(mix[k]) for k in names])
    if (w < 0).any() or w.sum() <= 0:
        raise ConfigError("regime_mix weights must be >= 0 and not all zero")
    exact = w / w.sum() * n
    counts = np.floor(exact).astype(int)
    rest = np.argsort(-(exact - counts), kind="stable")[: n - counts.sum()]
    counts[rest] += 1
    return [name for name, c in zip(names, counts) for _ in range(c)]


def corpus_from_config(config: dict) -> list[SynthParams]:
    """Per-case generator settings for a corpus description.

    Each case gets one regime (drawn so the corpus follows ``regime_mix``)
    for all of its pauses, its own seed, and per-case values drawn
    uniformly from any ``[lo, hi]`` ranges.
    """
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(config) - set(CORPUS_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    c = {**CORPUS_DEFAULTS, **config}
    n = c["n_cases"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ConfigError("n_cases must be a non-negative integer")
    if not isinstance(c["seed"], int) or c["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    mix = c["regime_mix"]
    if not isinstance(mix, dict) or not mix:
        raise ConfigError("regime_mix must map regime names to weights")
    bad = set(mix) - set(REGIMES)
    if bad:
        raise ConfigError(f"unknown regimes {sorted(bad)}; choose from {list(REGIMES)}")
    n_pauses = _range(c["pauses_per_case"], "pauses_per_case")
    if n_pauses[0] < 1 or any(v != int(v) for v in n_pauses):
        raise ConfigError("pauses_per_case must be positive integers")
    pause_s = _range(c["pause_seconds"], "pause_seconds")
    gain = _range(c["coupling_gain"], "coupling_gain")
    acc_sigma = _range(c["acc_noise_sigma"], "acc_noise_sigma")
    ecg_sigma = _range(c["ecg_noise_sigma"], "ecg_noise_sigma")
    hr = _range(c["heart_rate_bpm"], "heart_rate_bpm")
    if pause_s[0] <= 0:
        raise ConfigError("pause_seconds must be positive")
    if gain[0] <= 0 and any(mix.get(r, 0) > 0 for r in SC_REGIMES):
        raise ConfigError("coupling_gain must be > 0 when circulation regimes are present")
    if n == 0:
        return []

    rng = np.random.default_rng(c["seed"])
    regimes = [str(r) for r in rng.permutation(_allocate(mix, n))]
    seeds = np.random.SeedSequence(c["seed"]).generate_state(n)
    width = max(3, len(str(n)))
    cases = []
    for i, regime in enumerate(regimes):
        k = int(rng.integers(int(n_pauses[0]), int(n_pauses[1]) + 1))
        pauses = tuple((Segment(regime, float(np.round(rng.uniform(*pause_s), 3))),)
                       for _ in range(k))
        try:
            cases.append(SynthParams(
                pauses=pauses,
                compression_s=float(c["compression_s"]),
                heart_rate_bpm=hr,
                coupling_gain=float(rng.uniform(*gain)),
                acc_noise_sigma=float(rng.uniform(*acc_sigma)),
                ecg_noise_sigma=float(rng.uniform(*ecg_sigma)),
                artifact_rate=float(c["artifact_rate"]),
                fs_ecg=float(c["fs_ecg"]),
                fs_acc=float(c["fs_acc"]),
                patient_id=f"case{i + 1:0{width}d}",
                seed=int(seeds[i]),
            ))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
    return cases
