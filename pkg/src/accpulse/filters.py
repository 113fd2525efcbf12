"""Butterworth band-pass filtering shared by QRS detection and ECG features."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .signals import FS


@dataclass(frozen=True)
class FilterSpec:
    low_hz: float
    high_hz: float
    fs: float = FS
    order: int = 4

    def __post_init__(self):
        if not 0.0 < self.low_hz < self.high_hz < self.fs / 2.0:
            raise ValueError(f"need 0 < low < high < fs/2, got {self}")


QRS_FILTER = FilterSpec(0.5, 30.0)
ECG_FEATURE_FILTER = FilterSpec(0.8, 30.0)


@lru_cache(maxsize=32)
def design(spec: FilterSpec) -> np.ndarray:
    """Second-order sections of the band-pass.

    ``order`` is the order of the low-pass prototype (the band-pass itself
    has twice as many poles); the analog prototype is mapped with a
    prewarped bilinear transform.
    """
    return sps.butter(spec.order, [spec.low_hz, spec.high_hz], btype="bandpass",
                      output="sos", fs=spec.fs)


def butterworth_bandpass(x, spec: FilterSpec = ECG_FEATURE_FILTER) -> np.ndarray:
    """Zero-phase (forward-backward) band-pass; output length equals input."""
    x = np.asarray(x, dtype=float)
    return sps.sosfiltfilt(design(spec), x)

