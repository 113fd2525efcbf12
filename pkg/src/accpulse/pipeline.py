"""Recording -> accepted snippets -> feature rows, shared by the CLI and tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .features import FeatureVector, feature_vector
from .files import ANNOTATIONS_FILE, SIGNALS_FILE, FeatureTable, read_case
from .signals import Recording, Snippet, align, extract_snippets, prefilter


def process_recording(recording: Recording):
    """Accepted (snippet, features) pairs and (patient_id, start, reason)
    rejections, both in time order."""
    accepted: list[tuple[Snippet, FeatureVector]] = []
    rejected: list[tuple[str, float, str]] = []
    for sn in extract_snippets(recording, align(recording)):
        res = prefilter(sn)
        if res.accepted:
            accepted.append((sn, feature_vector(sn)))
        else:
            rejected.append((sn.patient_id, sn.start_time_s, res.reason))
    return accepted, rejected


def process_case_dir(case_dir):
    return process_recording(read_case(case_dir))


def find_case_dirs(paths) -> list[Path]:
    """Case directories among ``paths``; a directory without its own
    ``signals.csv`` contributes its case subdirectories (sorted)."""
    out = []
    for p in map(Path, paths):
        if (p / SIGNALS_FILE).exists() or (p / ANNOTATIONS_FILE).exists() or not p.is_dir():
            out.append(p)
        else:
            out.extend(sorted(c for c in p.iterdir()
                              if c.is_dir() and (c / SIGNALS_FILE).exists()))
    return out


def table_from_records(records) -> FeatureTable:
    records = list(records)
    if not records:
        return FeatureTable([], [], [], [], np.zeros((0, 49)), [])
    return FeatureTable(
        [sn.patient_id for sn, _ in records],
        [sn.start_time_s for sn, _ in records],
        [sn.label for sn, _ in records],
        [sn.rhythm for sn, _ in records],
        np.vstack([fv.values for _, fv in records]),
        [fv.flags for _, fv in records],
    )
