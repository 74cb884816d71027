"""Geometry core: projection, quaternion algebra, pose composition.

Expected values are either hand-computed trivia (principal-ray cases) or
come from independent oracles: homogeneous 3x4 projection and 4x4 matrix
products built directly from numpy, never from the code under test.
"""

import math

import numpy as np
import pytest

from posekit.errors import CheiralityError
from posekit.geometry import (
    Camera,
    LandmarkSet,
    Pose,
    Quaternion,
    compose,
    inverse,
    project,
    project_landmarks,
    random_unit_quaternion,
)

from conftest import projection_oracle, random_pose_with_visible_landmarks


def test_project_principal_ray():
    cam = Camera(1.0, 1.0, 0.0, 0.0, 8, 8)
    uv = project(Pose.identity(), (0.0, 0.0, 1.0), cam)
    assert uv[0] == 0.0 and uv[1] == 0.0


def test_project_point_on_optical_axis():
    cam = Camera(1000.0, 1000.0, 960.0, 600.0, 1920, 1200)
    pose = Pose(Quaternion.identity(), np.array([0.0, 0.0, 2.0]))
    uv = project(pose, (0.0, 0.0, 0.0), cam)
    assert uv[0] == 960.0 and uv[1] == 600.0


def test_project_matches_homogeneous_oracle(camera):
    rng = np.random.default_rng(7)
    for _ in range(100):
        pose = Pose(random_unit_quaternion(rng), np.array([0.0, 0.0, rng.uniform(2, 30)]))
        point = rng.uniform(-1, 1, 3)
        depth = pose.apply(point)[2]
        if depth <= 0.1:
            continue
        uv = project(pose, point, camera)
        assert np.abs(uv - projection_oracle(pose, point, camera)).max() < 1e-9


def test_project_behind_camera_raises(camera):
    pose = Pose(Quaternion.identity(), np.array([0.0, 0.0, -5.0]))
    with pytest.raises(CheiralityError):
        project(pose, (0.0, 0.0, 0.0), camera)


def test_projection_quaternion_sign_invariance(camera):
    rng = np.random.default_rng(11)
    for _ in range(20):
        q = random_unit_quaternion(rng)
        t = np.array([0.1, -0.2, 10.0])
        p = rng.uniform(-1, 1, 3)
        a = project(Pose(q, t), p, camera)
        b = project(Pose(Quaternion(-q.w, -q.x, -q.y, -q.z), t), p, camera)
        assert np.array_equal(a, b)  # exact: R is built from products only


def test_quaternion_matrix_orthonormal():
    rng = np.random.default_rng(3)
    for _ in range(100):
        R = random_unit_quaternion(rng).to_matrix()
        assert np.abs(R.T @ R - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(R) - 1.0) < 1e-9


def test_quaternion_from_rotvec_90deg_about_z():
    q = Quaternion.from_rotvec([0.0, 0.0, math.pi / 2])
    R = q.to_matrix()
    # rotates x onto y
    assert np.abs(R @ np.array([1.0, 0, 0]) - np.array([0, 1.0, 0])).max() < 1e-12


def test_compose_identity_and_inverse():
    rng = np.random.default_rng(5)
    p = Pose(random_unit_quaternion(rng), rng.uniform(-2, 2, 3))
    ident = compose(Pose.identity(), p)
    assert np.abs(ident.matrix() - p.matrix()).max() < 1e-15

    roundtrip = compose(p, inverse(p))
    assert np.abs(roundtrip.matrix() - np.eye(4)).max() < 1e-9


def test_compose_matches_matrix_product_oracle():
    rng = np.random.default_rng(9)
    for _ in range(50):
        a = Pose(random_unit_quaternion(rng), rng.uniform(-2, 2, 3))
        b = Pose(random_unit_quaternion(rng), rng.uniform(-2, 2, 3))
        assert np.abs(compose(a, b).matrix() - a.matrix() @ b.matrix()).max() < 1e-9


def test_project_landmarks_all_visible(camera, landmarks):
    rng = np.random.default_rng(21)
    pose = random_pose_with_visible_landmarks(rng, camera, landmarks)
    uv, visible = project_landmarks(pose, landmarks, camera)
    assert visible.all() and uv.shape == (len(landmarks), 2)
    assert np.isfinite(uv).all()


def test_project_landmarks_visibility_matches_per_point_predicate(camera, landmarks):
    """Off-axis pose: recompute the in-frame predicate independently."""
    rng = np.random.default_rng(22)
    # centre projects ~40 px from the right edge, so the model straddles it
    pose = Pose(random_unit_quaternion(rng), np.array([5.5, 1.0, 6.0]))
    uv, visible = project_landmarks(pose, landmarks, camera)
    for i, point in enumerate(landmarks.points):
        depth = pose.apply(point)[2]
        if depth <= 0:
            expected = False
        else:
            o = projection_oracle(pose, point, camera)
            expected = bool(
                0 <= o[0] < camera.width and 0 <= o[1] < camera.height
            )
        assert visible[i] == expected
    assert not visible.all()  # the pose was picked to push some out of frame


def test_project_landmarks_behind_camera_not_visible(camera):
    lm = LandmarkSet(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -20.0]]))
    pose = Pose(Quaternion.identity(), np.array([0.0, 0.0, 10.0]))
    uv, visible = project_landmarks(pose, lm, camera)
    assert visible[0] and not visible[1]
    assert np.isnan(uv[1]).all()


def test_pose_rejects_non_unit_quaternion():
    with pytest.raises(ValueError):
        Pose(Quaternion(1.0, 0.5, 0.0, 0.0), np.zeros(3))


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera(-1.0, 1.0, 0.0, 0.0, 10, 10)
    with pytest.raises(ValueError):
        Camera(1.0, 1.0, 0.0, 0.0, 0, 10)


def test_random_unit_quaternion_is_unit():
    rng = np.random.default_rng(1)
    for _ in range(100):
        assert abs(random_unit_quaternion(rng).norm() - 1.0) < 1e-12
