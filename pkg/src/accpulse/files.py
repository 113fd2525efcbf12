"""Case directories, feature/rejection/timeline CSVs and atomic writes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import CaseFormatError
from .features import FEATURE_NAMES
from .signals import Recording

SIGNALS_FILE = "signals.csv"
ANNOTATIONS_FILE = "annotations.json"
SIGNAL_COLUMNS = ("t_s", "ecg_mv", "acc")
FEATURE_META = ("patient_id", "start_time_s", "label", "rhythm")
REJECTION_COLUMNS = ("patient_id", "start_time_s", "reason")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x: float) -> str:
    """Shortest decimal that parses back to the same double."""
    return repr(float(x))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------------------
# case directories
# --------------------------------------------------------------------------


def write_case(recording: Recording, case_dir) -> None:
    """Write ``signals.csv`` and ``annotations.json``.

    Channels with different rates share the ``t_s`` column; a row lacking a
    sample of one channel leaves that cell empty.
    """
    case_dir = Path(case_dir)
    case_dir.mkdir(parents=True, exist_ok=True)
    te = np.round(recording.ecg_t0 + np.arange(recording.ecg.size) / recording.fs_ecg, 9)
    ta = np.round(recording.acc_t0 + np.arange(recording.acc.size) / recording.fs_acc, 9)
    t = np.union1d(te, ta)
    ie = np.searchsorted(t, te)
    ia = np.searchsorted(t, ta)
    ecg_col = [""] * t.size
    acc_col = [""] * t.size
    for i, v in zip(ie.tolist(), recording.ecg.tolist()):
        ecg_col[i] = f"{v:.9g}"
    for i, v in zip(ia.tolist(), recording.acc.tolist()):
        acc_col[i] = f"{v:.9g}"
    rows = ((f"{ti:.6f}", e, a) for ti, e, a in zip(t.tolist(), ecg_col, acc_col))
    atomic_write_text(case_dir / SIGNALS_FILE, csv_text(SIGNAL_COLUMNS, rows))
    ann = {
        "patient_id": recording.patient_id,
        "fs_ecg": recording.fs_ecg,
        "fs_acc": recording.fs_acc,
        "compression_free": [list(iv) for iv in recording.compression_free],
        "circulation": [list(iv) for iv in recording.circulation],
        "rhythm": [list(iv) for iv in recording.rhythm],
    }
    atomic_write_text(case_dir / ANNOTATIONS_FILE, json.dumps(ann, indent=1) + "\n")


def _channel(t, values, fs, name, path):
    keep = ~np.isnan(values)
    t, v = t[keep], values[keep]
    if v.size == 0:
        raise CaseFormatError(f"{path}: column {name!r} has no samples")
    expected = int(round((t[-1] - t[0]) * fs)) + 1
    if abs(expected - v.size) > max(1, 0.01 * v.size):
        raise CaseFormatError(
            f"{path}: {v.size} {name} samples do not match fs={fs} over "
            f"{t[-1] - t[0]:.3f} s")
    return v, float(t[0])


def read_case(case_dir) -> Recording:
    case_dir = Path(case_dir)
    sig_path = case_dir / SIGNALS_FILE
    ann_path = case_dir / ANNOTATIONS_FILE
    for p in (sig_path, ann_path):
        if not p.is_file():
            raise CaseFormatError(f"{p}: missing")
    try:
        ann = json.loads(ann_path.read_text())
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"{ann_path}: invalid JSON ({exc})") from exc
    for key in ("patient_id", "fs_ecg", "fs_acc", "compression_free", "circulation"):
        if key not in ann:
            raise CaseFormatError(f"{ann_path}: missing key {key!r}")
    try:
        with open(sig_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != list(SIGNAL_COLUMNS):
                raise CaseFormatError(f"{sig_path}: header must be {','.join(SIGNAL_COLUMNS)}")
            cols = [[], [], []]
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise CaseFormatError(f"{sig_path}:{lineno}: expected 3 fields")
                for c, cell in zip(cols, row):
                    c.append(float(cell) if cell.strip() else np.nan)
    except ValueError as exc:
        raise CaseFormatError(f"{sig_path}: {exc}") from exc
    t, ecg, acc = (np.asarray(c, dtype=float) for c in cols)
    if t.size == 0 or np.isnan(t).any():
        raise CaseFormatError(f"{sig_path}: no samples or missing t_s")
    if np.any(np.diff(t) <= 0):
        raise CaseFormatError(f"{sig_path}: t_s must be strictly increasing")
    fs_e, fs_a = float(ann["fs_ecg"]), float(ann["fs_acc"])
    ecg, ecg_t0 = _channel(t, ecg, fs_e, "ecg_mv", sig_path)
    acc, acc_t0 = _channel(t, acc, fs_a, "acc", sig_path)
    try:
        return Recording(
            patient_id=str(ann["patient_id"]),
            ecg=ecg, fs_ecg=fs_e, acc=acc, fs_acc=fs_a,
            compression_free=tuple((float(a), float(b)) for a, b in ann["compression_free"]),
            circulation=tuple((float(a), float(b)) for a, b in ann["circulation"]),
            rhythm=tuple((float(a), float(b), str(r)) for a, b, r in ann.get("rhythm", [])),
            ecg_t0=ecg_t0, acc_t0=acc_t0,
        )
    except (ValueError, TypeError) as exc:
        raise CaseFormatError(f"{ann_path}: {exc}") from exc


# --------------------------------------------------------------------------
# feature table
# --------------------------------------------------------------------------


class FeatureTable:
    """Rows of the feature CSV held as arrays."""

    def __init__(self, patient_ids, start_times, labels, rhythms, X, flags):
        self.patient_ids = np.asarray(patient_ids, dtype=object)
        self.start_times = np.asarray(start_times, dtype=float)
        self.labels = np.asarray(labels, dtype=int)
        self.rhythms = np.asarray(rhythms, dtype=object)
        self.X = np.asarray(X, dtype=float).reshape(-1, len(FEATURE_NAMES))
        self.flags = list(flags)

    def __len__(self) -> int:
        return int(self.labels.size)

    def subset(self, mask) -> "FeatureTable":
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        return FeatureTable(self.patient_ids[idx], self.start_times[idx], self.labels[idx],
                            self.rhythms[idx], self.X[idx], [self.flags[i] for i in idx])


def feature_rows(records) -> list[list[str]]:
    """``records``: iterables of (snippet, FeatureVector)."""
    rows = []
    for sn, fv in records:
        rows.append([sn.patient_id, fmt(sn.start_time_s), str(int(sn.label)), sn.rhythm or ""]
                    + [fmt(v) for v in fv.values] + [";".join(fv.flags)])
    return rows


def write_features(path, rows) -> None:
    atomic_write_text(path, csv_text(FEATURE_META + FEATURE_NAMES + ("flags",), rows))


def read_features(path) -> FeatureTable:
    path = Path(path)
    if not path.is_file():
        raise CaseFormatError(f"{path}: missing")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = list(FEATURE_META + FEATURE_NAMES + ("flags",))
        if header != expected:
            raise CaseFormatError(f"{path}: unexpected header")
        pids, times, labels, rhythms, X, flags = [], [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise CaseFormatError(f"{path}:{lineno}: expected {len(expected)} fields")
            try:
                pids.append(row[0])
                times.append(float(row[1]))
                label = int(row[2])
                if label not in (1, -1):
                    raise ValueError(f"label {label}")
                labels.append(label)
                rhythms.append(row[3] or None)
                X.append([float(v) for v in row[4:4 + len(FEATURE_NAMES)]])
                flags.append(tuple(f for f in row[-1].split(";") if f))
            except ValueError as exc:
                raise CaseFormatError(f"{path}:{lineno}: {exc}") from exc
    return FeatureTable(pids, times, labels, rhythms, X, flags)
