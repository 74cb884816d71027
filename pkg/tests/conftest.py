"""Shared synthetic-scene helpers for the test suite.

`random_pose_with_visible_landmarks` is the workhorse: a uniformly random
rotation plus a translation chosen so the model centre projects inside
the frame, rejected until every landmark is visible.  Forward projection
through these poses is the oracle most tests compare against.
"""

import numpy as np
import pytest

from posekit.defaults import default_camera, default_landmarks
from posekit.geometry import (
    Camera,
    LandmarkSet,
    Pose,
    project_landmarks,
    random_unit_quaternion,
)


@pytest.fixture(scope="session")
def camera() -> Camera:
    return default_camera()


@pytest.fixture(scope="session")
def landmarks() -> LandmarkSet:
    return default_landmarks()


def sample_center_translation(rng, camera, depth_range=(4.0, 20.0), margin=0.25):
    """Translation putting the object origin at a random in-frame pixel.

    `margin` shrinks the admissible pixel box on each side so the whole
    model usually fits in the frame.
    """
    z = rng.uniform(*depth_range)
    u = rng.uniform(margin * camera.width, (1 - margin) * camera.width)
    v = rng.uniform(margin * camera.height, (1 - margin) * camera.height)
    return np.array([(u - camera.cx) * z / camera.fx, (v - camera.cy) * z / camera.fy, z])


def random_pose_with_visible_landmarks(rng, camera, landmarks, depth_range=(4.0, 20.0)):
    """Random pose under which every landmark projects inside the frame."""
    for _ in range(1000):
        pose = Pose(
            random_unit_quaternion(rng),
            sample_center_translation(rng, camera, depth_range),
        )
        _, visible = project_landmarks(pose, landmarks, camera)
        if visible.all():
            return pose
    raise RuntimeError("could not sample an all-visible pose")


def projection_oracle(pose: Pose, point, camera: Camera) -> np.ndarray:
    """Brute-force homogeneous projection: K [R|t] then dehomogenize."""
    K = camera.matrix()
    Rt = np.hstack([pose.rotation.to_matrix(), pose.translation.reshape(3, 1)])
    ph = np.append(np.asarray(point, dtype=float), 1.0)
    x = K @ (Rt @ ph)
    return x[:2] / x[2]
