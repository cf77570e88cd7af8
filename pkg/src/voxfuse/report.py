"""Evaluation reports: JSON, aligned text, per-frame CSV, and figures.

The CSV and JSON files are the canonical machine-readable outputs; the
PNG figures render the same numbers for quick inspection.  Figures use
the object-oriented matplotlib API so no GUI backend is ever touched.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure


def report_to_dict(report, joint_names=None, pa_report=None):
    """Flatten a PerFrameReport (and optional aligned twin) to plain types."""

    def _num(x):
        return None if math.isnan(x) else float(x)

    def _section(rep):
        return {
            "overall_mean_mm": _num(rep.overall_mean),
            "full_mean_mm": _num(rep.full_mean),
            "partial_mean_mm": _num(rep.partial_mean),
            "num_full_frames": rep.num_full,
            "num_partial_frames": rep.num_partial,
            "per_joint_mean_mm": [float(v) for v in rep.per_joint_mean],
        }

    out = {"mpjpe": _section(report)}
    if pa_report is not None:
        out["pa_mpjpe"] = _section(pa_report)
    if joint_names is not None:
        out["joint_names"] = list(joint_names)
    out["frames"] = [
        {
            "frame": r.frame_id,
            "mean_mm": float(r.mean_error),
            "full": bool(r.full_frame),
        }
        for r in report.frames
    ]
    return out


def write_report_json(path, report, joint_names=None, pa_report=None):
    payload = report_to_dict(report, joint_names, pa_report)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def write_per_frame_csv(path, report, pa_report=None):
    """One row per frame: id, visibility class, mean error(s) in mm."""
    pa_by_frame = {}
    if pa_report is not None:
        pa_by_frame = {r.frame_id: r.mean_error for r in pa_report.frames}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["frame", "full", "mpjpe_mm"]
        if pa_report is not None:
            header.append("pa_mpjpe_mm")
        writer.writerow(header)
        for r in report.frames:
            row = [r.frame_id, int(r.full_frame), f"{r.mean_error:.6f}"]
            if pa_report is not None:
                row.append(f"{pa_by_frame[r.frame_id]:.6f}")
            writer.writerow(row)


def _fmt(x, width=10):
    return f"{'-':>{width}}" if math.isnan(x) else f"{x:>{width}.2f}"


def write_report_text(path, report, joint_names=None, pa_report=None):
    lines = []
    lines.append("pose error summary (mm)")
    lines.append("")
    header = f"{'':12}{'overall':>10}{'full':>10}{'partial':>10}"
    lines.append(header)
    lines.append(
        f"{'MPJPE':12}"
        + _fmt(report.overall_mean)
        + _fmt(report.full_mean)
        + _fmt(report.partial_mean)
    )
    if pa_report is not None:
        lines.append(
            f"{'PA-MPJPE':12}"
            + _fmt(pa_report.overall_mean)
            + _fmt(pa_report.full_mean)
            + _fmt(pa_report.partial_mean)
        )
    lines.append("")
    lines.append(f"frames: {report.num_full} full, {report.num_partial} partial")
    lines.append("")
    lines.append("per-joint mean error (mm)")
    names = joint_names or [f"joint{i}" for i in range(len(report.per_joint_mean))]
    for name, err in zip(names, report.per_joint_mean):
        lines.append(f"  {name:<14}{err:>10.2f}")
    Path(path).write_text("\n".join(lines) + "\n")


def render_per_frame_figure(path, report, pa_report=None):
    """Line plot of per-frame mean error, partial frames marked."""
    frames = [r.frame_id for r in report.frames]
    errors = [r.mean_error for r in report.frames]
    fig = Figure(figsize=(7.0, 3.5), dpi=150)
    ax = fig.subplots()
    ax.plot(frames, errors, lw=1.2, color="tab:blue", label="MPJPE")
    if pa_report is not None:
        ax.plot(
            [r.frame_id for r in pa_report.frames],
            [r.mean_error for r in pa_report.frames],
            lw=1.2,
            color="tab:orange",
            label="PA-MPJPE",
        )
    partial = [(r.frame_id, r.mean_error) for r in report.frames if not r.full_frame]
    if partial:
        px, py = zip(*partial)
        ax.scatter(px, py, s=18, color="tab:red", zorder=3, label="partial frame")
    ax.set_xlabel("frame")
    ax.set_ylabel("mean joint error (mm)")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)


def render_per_joint_figure(path, report, joint_names=None, pa_report=None):
    """Bar chart of per-joint mean error."""
    errs = np.asarray(report.per_joint_mean)
    names = list(joint_names) if joint_names else [f"joint{i}" for i in range(errs.size)]
    x = np.arange(errs.size)
    fig = Figure(figsize=(max(6.0, 0.5 * errs.size), 3.8), dpi=150)
    ax = fig.subplots()
    width = 0.38 if pa_report is not None else 0.7
    ax.bar(x, errs, width=width, color="tab:blue", label="MPJPE")
    if pa_report is not None:
        ax.bar(
            x + width,
            np.asarray(pa_report.per_joint_mean),
            width=width,
            color="tab:orange",
            label="PA-MPJPE",
        )
        ax.set_xticks(x + width / 2)
    else:
        ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("mean error (mm)")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
