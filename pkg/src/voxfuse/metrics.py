"""Pose accuracy metrics.

MPJPE is the mean Euclidean distance between corresponding joints in mm.
PA-MPJPE first removes the best-fit similarity transform (rotation,
translation, uniform scale) from the prediction via the Umeyama
closed-form alignment, so it measures pose shape only.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ConfigurationError, RankDeficiencyError
from .skeleton import Pose


def _paired(pred, gt):
    if pred.num_joints != gt.num_joints:
        raise ConfigurationError(
            f"prediction has {pred.num_joints} joints, ground truth {gt.num_joints}"
        )
    return pred.joints, gt.joints


def mpjpe(pred, gt):
    """Mean per-joint position error; returns (mean, per_joint) in mm."""
    p, g = _paired(pred, gt)
    per_joint = np.linalg.norm(p - g, axis=1)
    return float(per_joint.mean()), per_joint


@dataclass
class SimilarityTransform:
    """x -> scale * rotation @ x + translation."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * pts @ self.rotation.T + self.translation


def procrustes_align(pred, gt):
    """Best-fit similarity transform of pred onto gt (least squares).

    Closed-form solution via SVD of the cross-covariance with the
    determinant sign correction, so the rotation is always proper (no
    reflection).  Requires at least 3 joints in general position; raises
    RankDeficiencyError for coincident or collinear configurations.

    Returns (aligned_pose, transform).
    """
    p, g = _paired(pred, gt)
    k = p.shape[0]
    if k < 3:
        raise RankDeficiencyError(f"alignment needs at least 3 joints, got {k}")
    mu_p = p.mean(axis=0)
    mu_g = g.mean(axis=0)
    pc = p - mu_p
    gc = g - mu_g
    var_p = float((pc**2).sum()) / k
    if var_p < 1e-12:
        raise RankDeficiencyError("prediction joints are coincident")
    cov = gc.T @ pc / k
    u, d, vt = np.linalg.svd(cov)
    if d[0] < 1e-12 or d[1] < 1e-9 * d[0]:
        raise RankDeficiencyError("joint configuration is degenerate (collinear or flat-rank)")
    signs = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        signs[2] = -1.0
    rot = u @ np.diag(signs) @ vt
    scale = float((d * signs).sum()) / var_p
    if scale <= 0:
        raise RankDeficiencyError("degenerate configuration produced non-positive scale")
    trans = mu_g - scale * rot @ mu_p
    xform = SimilarityTransform(rot, trans, scale)
    return Pose(xform.apply(p), pred.joint_names), xform


def pa_mpjpe(pred, gt):
    """MPJPE after Procrustes alignment of the prediction; returns (mean, per_joint)."""
    aligned, _ = procrustes_align(pred, gt)
    return mpjpe(aligned, gt)


@dataclass
class FrameResult:
    """Per-frame joint errors plus the full/partial visibility class."""

    frame_id: int
    per_joint_error: np.ndarray
    full_frame: bool = True

    def __post_init__(self):
        self.per_joint_error = np.asarray(self.per_joint_error, dtype=np.float64)
        if self.per_joint_error.ndim != 1 or self.per_joint_error.size == 0:
            raise ConfigurationError("per-joint errors must be a non-empty 1-D array")

    @property
    def mean_error(self):
        return float(self.per_joint_error.mean())


@dataclass
class PerFrameReport:
    """Aggregated errors: overall, split by visibility class, and per joint."""

    frames: tuple
    overall_mean: float
    full_mean: float
    partial_mean: float
    per_joint_mean: np.ndarray
    num_full: int
    num_partial: int


def per_frame_report(results):
    """Aggregate FrameResults into a PerFrameReport.

    Means pool individual joint errors (equal joint count per frame is
    enforced, so this matches the mean of frame means).  The full or
    partial mean is NaN when that class is empty.
    """
    results = sorted(results, key=lambda r: r.frame_id)
    if not results:
        raise ConfigurationError("cannot aggregate an empty result list")
    k = results[0].per_joint_error.size
    for r in results:
        if r.per_joint_error.size != k:
            raise AlignmentError(
                f"frame {r.frame_id} has {r.per_joint_error.size} joints, expected {k}"
            )
    stacked = np.stack([r.per_joint_error for r in results])
    full_mask = np.array([r.full_frame for r in results], dtype=bool)

    def _mean(mask):
        return float(stacked[mask].mean()) if mask.any() else float("nan")

    return PerFrameReport(
        frames=tuple(results),
        overall_mean=float(stacked.mean()),
        full_mean=_mean(full_mask),
        partial_mean=_mean(~full_mask),
        per_joint_mean=stacked.mean(axis=0),
        num_full=int(full_mask.sum()),
        num_partial=int((~full_mask).sum()),
    )
