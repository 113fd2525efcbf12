"""SVG figures: mean ROC with its band, and a case timeline. Output is
byte-stable across runs (fixed hash salt, no date metadata)."""

from __future__ import annotations

import io
from typing import Sequence

from .files import atomic_write_text


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "accpulse"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> None:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    atomic_write_text(path, buf.getvalue())


def roc_svg(path, curves: Sequence[tuple[str, dict]]) -> None:
    """``curves``: (label, roc_mean block of an evaluation report) pairs."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    for label, roc in curves:
        line, = ax.plot(roc["fpr"], roc["tpr_mean"], label=label)
        ax.fill_between(roc["fpr"], roc["tpr_lo"], roc["tpr_hi"], alpha=0.2,
                        color=line.get_color(), linewidth=0)
    ax.plot([0, 1], [0, 1], color="0.6", linestyle=":", linewidth=1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend(loc="lower right")
    _save(fig, path)
    plt.close(fig)


def timeline_svg(path, points, recording) -> None:
    """Probabilities per snippet over time, with pauses and circulation shaded."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 3))
    for s, e in recording.compression_free:
        ax.axvspan(s, e, color="0.92", linewidth=0)
    for s, e in recording.circulation:
        ax.axvspan(s, e, ymin=0.0, ymax=0.04, color="tab:red", linewidth=0)
    t = [p.start_time_s + 2.0 for p in points]
    ax.plot(t, [p.probability for p in points], ".", color="tab:blue", label="P(SC)")
    for k in sorted({p.pause_index for p in points}):
        sel = [p for p in points if p.pause_index == k]
        ax.plot([p.start_time_s + 2.0 for p in sel], [p.smoothed_probability for p in sel],
                "-", color="tab:purple", label="smoothed" if k == points[0].pause_index else None)
    ax.axhline(0.5, color="0.5", linestyle=":", linewidth=1)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("time (s), snippet centers")
    ax.set_ylabel("P(SC)")
    ax.set_title(recording.patient_id)
    ax.legend(loc="upper left")
    _save(fig, path)
    plt.close(fig)
