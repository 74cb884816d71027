"""Pose initialization: minimal three-point solver inside a RANSAC loop.

Hypotheses come from 4-point minimal samples: a P3P kernel (OpenCV's
implementation of Gao's closed-form solver) on three correspondences,
with the fourth used to pick among the up-to-four algebraic solutions.
Hypotheses are scored by inlier count over all correspondences under the
Euclidean reprojection residual; ties break toward the lower inlier RMS.
The winner is the raw minimal-sample pose -- no inlier refit happens
here, downstream refinement consumes the full correspondence set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import DegenerateGeometryError, InsufficientDataError, NoConsensusError
from .geometry import (
    Camera,
    LandmarkSet,
    Pose,
    Quaternion,
    correspondence_arrays,
)
from .refine import residual_norms

__all__ = ["RansacConfig", "RansacResult", "solve_p3p", "ransac_pnp"]

#: A valid P3P candidate must hit its own minimal set this closely (px).
P3P_SELF_RESIDUAL = 1e-6

#: Relative triangle-area threshold below which a 3D triple is collinear.
COLLINEAR_TOL = 1e-9

#: Attempts at drawing a non-degenerate minimal sample before giving up.
MAX_SAMPLE_RETRIES = 100


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 1000
    inlier_threshold: float = 5.0
    confidence: float = 0.99
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must lie in (0, 1)")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")


@dataclass(frozen=True)
class RansacResult:
    pose: Pose
    inlier_mask: np.ndarray
    iterations_run: int


def _check_triple(P3: np.ndarray, Z3: np.ndarray) -> bool:
    """True when the 3D triple spans a triangle and the pixels are distinct."""
    area = np.linalg.norm(np.cross(P3[1] - P3[0], P3[2] - P3[0]))
    scale = max(
        np.linalg.norm(P3[1] - P3[0]),
        np.linalg.norm(P3[2] - P3[0]),
        np.linalg.norm(P3[2] - P3[1]),
    )
    if scale == 0.0 or area < COLLINEAR_TOL * scale * scale:
        return False
    for i in range(3):
        for j in range(i + 1, 3):
            if np.array_equal(Z3[i], Z3[j]):
                return False
    return True


def _p3p_kernel(P3: np.ndarray, Z3: np.ndarray, camera: Camera) -> list[Pose]:
    """All P3P solutions that are cheirality-positive and reproject their
    own three points to numerical precision."""
    n, rvecs, tvecs = cv2.solveP3P(
        P3.astype(np.float64),
        Z3.astype(np.float64),
        camera.matrix(),
        None,
        flags=cv2.SOLVEPNP_P3P,
    )
    poses = []
    for k in range(n):
        rvec = np.asarray(rvecs[k]).ravel()
        tvec = np.asarray(tvecs[k]).ravel()
        if not (np.all(np.isfinite(rvec)) and np.all(np.isfinite(tvec))):
            continue  # the kernel emits NaN roots for some contaminated samples
        q = Quaternion.from_rotvec(rvec).normalized()
        pose = Pose(q, tvec)
        r, valid = residual_norms(pose, P3, Z3, camera)
        if valid.all() and r.max() < P3P_SELF_RESIDUAL:
            poses.append(pose)
    return poses


def solve_p3p(correspondences, landmarks: LandmarkSet, camera: Camera) -> list[Pose]:
    """Minimal perspective-three-point solve; up to 4 pose candidates.

    Raises DegenerateGeometryError for collinear landmarks or coincident
    image points; an empty list means no real solution survived the
    cheirality check.
    """
    if len(correspondences) != 3:
        raise InsufficientDataError("P3P needs exactly 3 correspondences")
    P3, Z3, _ = correspondence_arrays(correspondences, landmarks)
    if P3.shape[0] != 3:
        raise InsufficientDataError("P3P needs exactly 3 visible correspondences")
    if not _check_triple(P3, Z3):
        raise DegenerateGeometryError(
            "P3P triple is degenerate (collinear points or coincident pixels)"
        )
    return _p3p_kernel(P3, Z3, camera)


def _adaptive_bound(inlier_ratio: float, confidence: float) -> int:
    """Iterations needed to hit an all-inlier 4-sample with `confidence`."""
    p_good = inlier_ratio**4
    if p_good <= 0.0:
        return np.iinfo(np.int64).max
    if p_good >= 1.0:
        return 1
    return max(1, math.ceil(math.log(1.0 - confidence) / math.log(1.0 - p_good)))


def ransac_pnp(
    correspondences,
    landmarks: LandmarkSet,
    camera: Camera,
    config: RansacConfig,
) -> RansacResult:
    """Robust pose from 2D-3D correspondences.

    Deterministic given `config.rng_seed`; stops early once the adaptive
    bound derived from the best inlier ratio is reached.  Raises
    InsufficientDataError below 4 visible correspondences and
    NoConsensusError when no hypothesis gathers 4 inliers.
    """
    P, Z, vis_idx = correspondence_arrays(correspondences, landmarks)
    n = P.shape[0]
    if n < 4:
        raise InsufficientDataError(
            f"RANSAC needs at least 4 visible correspondences, got {n}"
        )

    rng = np.random.default_rng(config.rng_seed)
    thr = config.inlier_threshold
    best_pose = None
    best_count = 0
    best_rms = np.inf
    required = config.max_iterations
    iterations = 0

    while iterations < min(required, config.max_iterations):
        iterations += 1
        for _ in range(MAX_SAMPLE_RETRIES):
            sample = rng.choice(n, size=4, replace=False)
            if _check_triple(P[sample[:3]], Z[sample[:3]]):
                break
        else:
            raise DegenerateGeometryError(
                "could not draw a non-degenerate minimal sample "
                f"in {MAX_SAMPLE_RETRIES} attempts"
            )

        candidates = _p3p_kernel(P[sample[:3]], Z[sample[:3]], camera)
        if not candidates:
            continue

        # fourth point disambiguates the algebraic solutions
        P4, Z4 = P[sample[3:4]], Z[sample[3:4]]
        fourth = [residual_norms(c, P4, Z4, camera)[0][0] for c in candidates]
        pose = candidates[int(np.argmin(fourth))]

        r, _ = residual_norms(pose, P, Z, camera)
        inliers = r <= thr
        count = int(inliers.sum())
        if count < 4:
            continue
        rms = float(np.sqrt(np.mean(r[inliers] ** 2)))
        if count > best_count or (count == best_count and rms < best_rms):
            best_pose, best_count, best_rms = pose, count, rms
            required = _adaptive_bound(count / n, config.confidence)

    if best_pose is None:
        raise NoConsensusError(
            f"no pose with >= 4 inliers at threshold {thr} px "
            f"after {iterations} iterations"
        )

    # recompute the mask under the winning pose so the result is
    # self-consistent by construction
    r, _ = residual_norms(best_pose, P, Z, camera)
    mask = np.zeros(len(correspondences), dtype=bool)
    mask[vis_idx[r <= thr]] = True
    return RansacResult(pose=best_pose, inlier_mask=mask, iterations_run=iterations)
