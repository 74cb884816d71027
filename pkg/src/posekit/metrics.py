"""Pose evaluation metrics: rotation/translation errors, challenge-style
scores, bounding boxes from projected landmarks, and IOU.

Rotation error is the geodesic angle on SO(3), computed from the real
part of the Hamilton product q_true ⊗ conj(q_est); it is symmetric and
invariant to the sign of either quaternion.  The overall score is the
rotation angle in radians plus the relative translation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Camera, Pose, Quaternion

__all__ = [
    "PoseScore",
    "BBox",
    "rotation_error",
    "translation_error",
    "translation_score",
    "pose_score",
    "bbox_from_points",
    "iou",
]

#: How far a quaternion may deviate from unit norm before we refuse to score it.
_UNIT_TOL = 1e-6


def rotation_error(q_true: Quaternion, q_est: Quaternion) -> float:
    """Geodesic rotation error in radians: 2*acos(|Re(q_true ⊗ conj(q_est))|)."""
    for q in (q_true, q_est):
        if abs(q.norm() - 1.0) > _UNIT_TOL:
            raise ValueError(f"quaternion is not unit (norm={q.norm()!r})")
    z = (q_true * q_est.conjugate()).w
    # |z| can exceed 1 by ~1e-16 for near-identical rotations
    return 2.0 * math.acos(min(1.0, abs(z)))


def translation_error(t_true, t_est) -> float:
    """Euclidean distance in metres."""
    return float(np.linalg.norm(np.asarray(t_true, float) - np.asarray(t_est, float)))


def translation_score(t_true, t_est) -> float:
    """Translation error relative to the ground-truth range."""
    norm_true = float(np.linalg.norm(np.asarray(t_true, float)))
    if norm_true == 0.0:
        raise ValueError("translation score undefined for zero ground-truth translation")
    return translation_error(t_true, t_est) / norm_true


@dataclass(frozen=True)
class PoseScore:
    """Full per-image score record; s is exactly s_r + s_t."""

    e_r_deg: float
    e_t_m: float
    s_r: float
    s_t: float
    s: float


def pose_score(truth: Pose, estimate: Pose) -> PoseScore:
    e_r = rotation_error(truth.rotation, estimate.rotation)
    e_t = translation_error(truth.translation, estimate.translation)
    s_r = e_r  # radians
    s_t = translation_score(truth.translation, estimate.translation)
    return PoseScore(
        e_r_deg=math.degrees(e_r), e_t_m=e_t, s_r=s_r, s_t=s_t, s=s_r + s_t
    )


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("bounding box must have positive extent")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


def bbox_from_points(points: np.ndarray, relax: float, camera: Camera) -> BBox:
    """Relaxed axis-aligned rectangle around 2D points, clamped to the frame.

    The tight min rectangle is grown on every side by relax * max(box
    width, box height).  Degenerate results (fewer than 2 distinct
    coordinates on an axis and no relaxation, or a box clamped away
    entirely) raise ValueError.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("no points to bound")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    x_min, y_min = pts.min(axis=0)
    x_max, y_max = pts.max(axis=0)
    pad = relax * max(x_max - x_min, y_max - y_min)
    return BBox(
        x_min=max(x_min - pad, 0.0),
        y_min=max(y_min - pad, 0.0),
        x_max=min(x_max + pad, float(camera.width)),
        y_max=min(y_max + pad, float(camera.height)),
    )


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)
