"""Multi-view landmark triangulation from posed 2D observations.

Each landmark is reconstructed independently (the squared-reprojection
objective has no cross terms): a linear DLT solve from the stacked
projection constraints, followed by a Levenberg-Marquardt polish of the
nonlinear reprojection objective

    sum_j || z_j - project(pose_j, x) ||^2

over the observing images j.  Poses are treated as ground truth and are
never adjusted.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    CheiralityError,
    DegenerateGeometryError,
    InputError,
    InsufficientDataError,
)
from .geometry import Camera, LandmarkSet, Pose

__all__ = ["Observation", "TriangulationResult", "triangulate"]

#: Smallest max pairwise viewing-ray angle (radians) we accept per landmark.
MIN_RAY_ANGLE = 1e-4

#: LM polish caps: iterations and relative objective-decrease stop.
POLISH_MAX_ITER = 50
POLISH_FTOL = 1e-12


@dataclass(frozen=True)
class Observation:
    """2D coordinates of one landmark in one image."""

    landmark_index: int
    image_index: int
    image_point: np.ndarray

    def __post_init__(self):
        uv = np.asarray(self.image_point, dtype=float).reshape(2)
        object.__setattr__(self, "image_point", uv)
        if not np.all(np.isfinite(uv)):
            raise ValueError("image point must be finite")
        if self.landmark_index < 0 or self.image_index < 0:
            raise ValueError("indices must be non-negative")


@dataclass(frozen=True)
class TriangulationResult:
    landmarks: LandmarkSet
    rms_residual_px: float
    objective_px2: float


def _projection_rows(P: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Two homogeneous DLT constraints from one observation: x X - P12 X = 0."""
    return np.array([uv[0] * P[2] - P[0], uv[1] * P[2] - P[1]])


def _dlt_point(Ps, uvs) -> np.ndarray:
    A = np.vstack([_projection_rows(P, uv) for P, uv in zip(Ps, uvs)])
    _, s, vt = np.linalg.svd(A)
    xh = vt[-1]
    if abs(xh[3]) < 1e-12 * np.linalg.norm(xh[:3]):
        raise DegenerateGeometryError("DLT solution is a point at infinity")
    return xh[:3] / xh[3]


def _ray_angles_ok(poses, uvs, camera) -> bool:
    """Max pairwise angle between viewing rays must exceed MIN_RAY_ANGLE."""
    K_inv = np.linalg.inv(camera.matrix())
    dirs = []
    for pose, uv in zip(poses, uvs):
        d_cam = K_inv @ np.array([uv[0], uv[1], 1.0])
        d_obj = pose.rotation.to_matrix().T @ d_cam
        dirs.append(d_obj / np.linalg.norm(d_obj))
    max_angle = 0.0
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            c = float(np.clip(np.dot(dirs[i], dirs[j]), -1.0, 1.0))
            max_angle = max(max_angle, np.arccos(c))
    return max_angle >= MIN_RAY_ANGLE


def _reprojection_residuals(x, poses, uvs, camera):
    """Flat residual vector [u - z_u, v - z_v, ...] over all observations."""
    out = np.empty(2 * len(poses))
    for k, (pose, uv) in enumerate(zip(poses, uvs)):
        Xc = pose.apply(x)
        u = camera.fx * Xc[0] / Xc[2] + camera.cx
        v = camera.fy * Xc[1] / Xc[2] + camera.cy
        out[2 * k] = u - uv[0]
        out[2 * k + 1] = v - uv[1]
    return out


def _reprojection_jacobian(x, poses, uvs, camera):
    J = np.empty((2 * len(poses), 3))
    for k, pose in enumerate(poses):
        R = pose.rotation.to_matrix()
        X, Y, Z = pose.apply(x)
        J_proj = np.array(
            [[camera.fx / Z, 0.0, -camera.fx * X / Z**2],
             [0.0, camera.fy / Z, -camera.fy * Y / Z**2]]
        )
        J[2 * k : 2 * k + 2] = J_proj @ R
    return J


def _polish_point(x0, poses, uvs, camera) -> np.ndarray:
    """LM refinement of one point; never returns a worse objective than x0."""
    f0 = _reprojection_residuals(x0, poses, uvs, camera)
    obj0 = float(f0 @ f0)
    result = least_squares(
        _reprojection_residuals,
        x0,
        jac=_reprojection_jacobian,
        args=(poses, uvs, camera),
        method="lm",
        ftol=POLISH_FTOL,
        xtol=1e-14,
        gtol=1e-14,
        max_nfev=POLISH_MAX_ITER * 4,
    )
    obj1 = float(result.fun @ result.fun)
    return result.x if obj1 <= obj0 else x0


def triangulate(observations, poses, camera: Camera) -> TriangulationResult:
    """Reconstruct all referenced landmarks from the observation set.

    `poses` is the per-image ground-truth pose list; observation
    image_index values index into it.  Raises InputError on broken
    references or duplicate (landmark, image) pairs, InsufficientDataError
    for landmarks seen in fewer than two images, DegenerateGeometryError
    for near-parallel viewing rays, and CheiralityError if a reconstructed
    point falls behind an observing camera.
    """
    if not observations:
        raise InsufficientDataError("no observations given")

    by_landmark: dict[int, list[Observation]] = defaultdict(list)
    seen = set()
    for obs in observations:
        if obs.image_index >= len(poses):
            raise InputError(
                f"observation references image {obs.image_index} "
                f"but only {len(poses)} poses were given"
            )
        key = (obs.landmark_index, obs.image_index)
        if key in seen:
            raise InputError(f"duplicate observation for landmark/image pair {key}")
        seen.add(key)
        by_landmark[obs.landmark_index].append(obs)

    n_landmarks = max(by_landmark) + 1
    K = camera.matrix()
    points = np.empty((n_landmarks, 3))
    objective = 0.0

    for idx in range(n_landmarks):
        group = by_landmark.get(idx)
        if group is None or len(group) < 2:
            raise InsufficientDataError(
                f"landmark {idx} observed in {0 if group is None else len(group)} "
                "image(s); need at least 2"
            )
        obs_poses = [poses[o.image_index] for o in group]
        uvs = [o.image_point for o in group]
        if not _ray_angles_ok(obs_poses, uvs, camera):
            raise DegenerateGeometryError(
                f"viewing rays for landmark {idx} are near-parallel "
                f"(max angle < {MIN_RAY_ANGLE} rad)"
            )
        Ps = [K @ np.hstack([p.rotation.to_matrix(), p.translation.reshape(3, 1)])
              for p in obs_poses]
        x = _dlt_point(Ps, uvs)
        # a behind-camera linear solution would blow up the polish residuals
        if min(p.apply(x)[2] for p in obs_poses) <= 0.0:
            raise CheiralityError(
                f"triangulated landmark {idx} lies behind an observing camera"
            )
        x = _polish_point(x, obs_poses, uvs, camera)
        if min(p.apply(x)[2] for p in obs_poses) <= 0.0:
            raise CheiralityError(
                f"triangulated landmark {idx} lies behind an observing camera"
            )
        points[idx] = x
        f = _reprojection_residuals(x, obs_poses, uvs, camera)
        objective += float(f @ f)

    n_obs = len(observations)
    return TriangulationResult(
        landmarks=LandmarkSet(points),
        rms_residual_px=float(np.sqrt(objective / n_obs)),
        objective_px2=objective,
    )
