"""P3P kernel and RANSAC loop against forward-projection oracles.

Scenes project the known model through a known pose; the solvers must
recover that pose.  Outlier scenarios carry generator labels so the
inlier mask can be checked exactly.
"""

import numpy as np
import pytest

from posekit.errors import (
    DegenerateGeometryError,
    InsufficientDataError,
    NoConsensusError,
)
from posekit.geometry import Correspondence, LandmarkSet, Pose, Quaternion, project
from posekit.metrics import rotation_error, translation_error
from posekit.pnp import RansacConfig, RansacResult, ransac_pnp, solve_p3p
from posekit.refine import reprojection_residual

from conftest import random_pose_with_visible_landmarks


def exact_correspondences(pose, landmarks, camera, indices=None):
    idx = range(len(landmarks)) if indices is None else indices
    return [Correspondence(i, project(pose, landmarks.points[i], camera)) for i in idx]


# ------------------------------------------------------------------ p3p

def test_p3p_contains_true_pose(camera, landmarks):
    rng = np.random.default_rng(31)
    for _ in range(20):
        truth = random_pose_with_visible_landmarks(rng, camera, landmarks)
        corrs = exact_correspondences(truth, landmarks, camera, indices=[0, 3, 9])
        candidates = solve_p3p(corrs, landmarks, camera)
        assert candidates, "no P3P solution for a realizable configuration"
        best = min(
            candidates,
            key=lambda c: rotation_error(truth.rotation, c.rotation)
            + translation_error(truth.translation, c.translation),
        )
        assert rotation_error(truth.rotation, best.rotation) < 1e-6
        assert translation_error(truth.translation, best.translation) < 1e-6


def test_p3p_candidates_reproject_exactly(camera, landmarks):
    rng = np.random.default_rng(32)
    truth = random_pose_with_visible_landmarks(rng, camera, landmarks)
    corrs = exact_correspondences(truth, landmarks, camera, indices=[1, 5, 10])
    for cand in solve_p3p(corrs, landmarks, camera):
        for c in corrs:
            assert reprojection_residual(cand, c, landmarks, camera) < 1e-6


def test_p3p_multiple_candidates_all_reproject_exactly(camera):
    """The three-point problem regularly has several cheirality-valid
    solutions; every returned candidate must interpolate the data.

    (The textbook symmetric case -- equilateral triangle viewed down its
    axis -- is intentionally avoided: it sits on the P3P danger cylinder
    where the double root is numerically unstable.)
    """
    from posekit.geometry import random_unit_quaternion

    rng = np.random.default_rng(0)
    multi = 0
    for _ in range(200):
        pts = rng.uniform(-0.6, 0.6, (3, 3))
        pose = Pose(
            random_unit_quaternion(rng),
            np.array([rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(5, 15)]),
        )
        if (pose.apply(pts)[:, 2] <= 1.0).any():
            continue
        tri = LandmarkSet(pts)
        corrs = exact_correspondences(pose, tri, camera)
        try:
            candidates = solve_p3p(corrs, tri, camera)
        except DegenerateGeometryError:
            continue
        for cand in candidates:
            for c in corrs:
                assert reprojection_residual(cand, c, tri, camera) < 1e-6
        if len(candidates) >= 2:
            multi += 1
    assert multi >= 20  # multiple-solution cases are common, not exotic


def test_p3p_collinear_degenerate(camera):
    line = LandmarkSet(np.array([[0.0, 0.0, -0.2], [0.0, 0.0, 0.0], [0.0, 0.0, 0.2]]))
    pose = Pose(Quaternion.from_rotvec([0.3, 0.2, 0.0]).normalized(),
                np.array([0.0, 0.0, 10.0]))
    corrs = exact_correspondences(pose, line, camera)
    with pytest.raises(DegenerateGeometryError):
        solve_p3p(corrs, line, camera)


def test_p3p_wrong_count(camera, landmarks):
    pose = Pose(Quaternion.identity(), np.array([0.0, 0.0, 10.0]))
    corrs = exact_correspondences(pose, landmarks, camera, indices=[0, 1])
    with pytest.raises(InsufficientDataError):
        solve_p3p(corrs, landmarks, camera)


# --------------------------------------------------------------- ransac

def test_ransac_noiseless_all_inliers(camera, landmarks):
    rng = np.random.default_rng(33)
    truth = random_pose_with_visible_landmarks(rng, camera, landmarks)
    corrs = exact_correspondences(truth, landmarks, camera)
    result = ransac_pnp(corrs, landmarks, camera, RansacConfig(rng_seed=5))
    assert rotation_error(truth.rotation, result.pose.rotation) < 1e-6
    assert translation_error(truth.translation, result.pose.translation) < 1e-6
    assert result.inlier_mask.all() and result.inlier_mask.size == 11


def test_ransac_excludes_gross_outliers(camera, landmarks):
    rng = np.random.default_rng(34)
    truth = random_pose_with_visible_landmarks(rng, camera, landmarks)
    corrs = []
    outlier_ids = {1, 6, 9}
    for i, p in enumerate(landmarks.points):
        uv = project(truth, p, camera)
        if i in outlier_ids:
            uv = rng.uniform([0, 0], [camera.width, camera.height])
            while np.linalg.norm(uv - project(truth, p, camera)) < 50:
                uv = rng.uniform([0, 0], [camera.width, camera.height])
        else:
            uv = uv + rng.normal(0, 1.0, 2)
        corrs.append(Correspondence(i, uv))
    result = ransac_pnp(
        corrs, landmarks, camera,
        RansacConfig(inlier_threshold=5.0, rng_seed=7),
    )
    assert set(np.nonzero(~result.inlier_mask)[0]) == outlier_ids


def test_ransac_mask_self_consistent(camera, landmarks):
    rng = np.random.default_rng(35)
    truth = random_pose_with_visible_landmarks(rng, camera, landmarks)
    corrs = [
        Correspondence(i, project(truth, p, camera) + rng.normal(0, 2.0, 2))
        for i, p in enumerate(landmarks.points)
    ]
    cfg = RansacConfig(inlier_threshold=5.0, rng_seed=11)
    result = ransac_pnp(corrs, landmarks, camera, cfg)
    for k, c in enumerate(corrs):
        r = reprojection_residual(result.pose, c, landmarks, camera)
        assert result.inlier_mask[k] == (r <= cfg.inlier_threshold)


def test_ransac_deterministic(camera, landmarks):
    rng = np.random.default_rng(36)
    truth = random_pose_with_visible_landmarks(rng, camera, landmarks)
    corrs = [
        Correspondence(i, project(truth, p, camera) + rng.normal(0, 1.5, 2))
        for i, p in enumerate(landmarks.points)
    ]
    cfg = RansacConfig(rng_seed=99)
    a = ransac_pnp(corrs, landmarks, camera, cfg)
    b = ransac_pnp(corrs, landmarks, camera, cfg)
    assert a.pose.rotation == b.pose.rotation
    assert np.array_equal(a.pose.translation, b.pose.translation)
    assert np.array_equal(a.inlier_mask, b.inlier_mask)
    assert a.iterations_run == b.iterations_run


def test_ransac_early_exit_on_clean_data(camera, landmarks):
    rng = np.random.default_rng(37)
    truth = random_pose_with_visible_landmarks(rng, camera, landmarks)
    corrs = exact_correspondences(truth, landmarks, camera)
    result = ransac_pnp(corrs, landmarks, camera, RansacConfig(rng_seed=1))
    assert result.iterations_run <= 3  # all-inlier ratio collapses the bound


def test_ransac_insufficient_data(camera, landmarks):
    pose = Pose(Quaternion.identity(), np.array([0.0, 0.0, 10.0]))
    corrs = exact_correspondences(pose, landmarks, camera, indices=[0, 1, 2])
    with pytest.raises(InsufficientDataError):
        ransac_pnp(corrs, landmarks, camera, RansacConfig())


def test_ransac_invisible_correspondences_ignored(camera, landmarks):
    rng = np.random.default_rng(38)
    truth = random_pose_with_visible_landmarks(rng, camera, landmarks)
    corrs = exact_correspondences(truth, landmarks, camera)
    corrs[0] = Correspondence(0, (0.0, 0.0), visible=False)
    result = ransac_pnp(corrs, landmarks, camera, RansacConfig(rng_seed=3))
    assert not result.inlier_mask[0]
    assert result.inlier_mask[1:].all()


def test_ransac_no_consensus(camera, landmarks):
    """Pure noise correspondences: nothing should gather 4 inliers at a
    tight threshold."""
    rng = np.random.default_rng(39)
    corrs = [
        Correspondence(i, rng.uniform([0, 0], [camera.width, camera.height]))
        for i in range(len(landmarks))
    ]
    with pytest.raises(NoConsensusError):
        ransac_pnp(
            corrs, landmarks, camera,
            RansacConfig(max_iterations=50, inlier_threshold=0.01, rng_seed=2),
        )


def test_ransac_config_validation():
    with pytest.raises(ValueError):
        RansacConfig(max_iterations=0)
    with pytest.raises(ValueError):
        RansacConfig(inlier_threshold=-1.0)
    with pytest.raises(ValueError):
        RansacConfig(confidence=1.0)
