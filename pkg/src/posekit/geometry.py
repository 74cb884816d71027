"""Rigid transforms, quaternion algebra and pinhole projection.

Conventions used across the package:

  Object/model frame: landmark coordinates, metres.
  Camera frame (right-handed, standard computer vision):
    X right, Y down, Z forward along the optical axis.
  Image frame: u right, v down, pixels, origin at the top-left corner.

  A `Pose` maps object coordinates into the camera frame:
      p_cam = R(q) @ p_obj + t
  with `q` a unit quaternion in Hamilton convention, stored scalar-first
  as (w, x, y, z).  `q` and `-q` encode the same rotation.

  Pinhole projection of p_cam = (X, Y, Z), Z > 0:
      u = fx * X / Z + cx,   v = fy * Y / Z + cy
  No lens distortion is modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CheiralityError

__all__ = [
    "Quaternion",
    "Pose",
    "Camera",
    "LandmarkSet",
    "Correspondence",
    "project",
    "project_points",
    "correspondence_arrays",
    "project_landmarks",
    "compose",
    "inverse",
    "random_unit_quaternion",
]

#: Unit-norm tolerance enforced on quaternions entering a Pose.
UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion, Hamilton convention, scalar-first (w, x, y, z)."""

    w: float
    x: float
    y: float
    z: float

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_rotvec(cls, rotvec) -> "Quaternion":
        """Exponential map: axis-angle 3-vector (radians) to quaternion."""
        r = np.asarray(rotvec, dtype=float)
        angle = float(np.linalg.norm(r))
        if angle < 1e-12:
            # first-order expansion, well below representable rotation error
            half = 0.5 * r
            return cls(1.0, half[0], half[1], half[2]).normalized()
        axis = r / angle
        s = math.sin(0.5 * angle)
        return cls(math.cos(0.5 * angle), s * axis[0], s * axis[1], s * axis[2])

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        """Hamilton product self ⊗ other."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def to_matrix(self) -> np.ndarray:
        """3x3 rotation matrix R with p' = R @ p.

        Built from component products only, so q and -q give the exact
        same matrix bit for bit.
        """
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ],
            dtype=float,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)


def random_unit_quaternion(rng: np.random.Generator) -> Quaternion:
    """Uniform random rotation: normalized 4D Gaussian draw."""
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    return Quaternion(*v)


@dataclass(frozen=True)
class Pose:
    """Rigid object-to-camera transform: p_cam = R(rotation) @ p + translation."""

    rotation: Quaternion
    translation: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "translation", t)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        if abs(self.rotation.norm() - 1.0) > UNIT_NORM_TOL:
            raise ValueError(
                f"rotation quaternion is not unit (norm={self.rotation.norm()!r})"
            )

    @classmethod
    def identity(cls) -> "Pose":
        return cls(Quaternion.identity(), np.zeros(3))

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous transform."""
        m = np.eye(4)
        m[:3, :3] = self.rotation.to_matrix()
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (..., 3) object points into the camera frame."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.to_matrix().T + self.translation


def compose(a: Pose, b: Pose) -> Pose:
    """Pose of b seen through a: (a ∘ b).apply(p) == a.apply(b.apply(p))."""
    q = (a.rotation * b.rotation).normalized()
    t = a.rotation.to_matrix() @ b.translation + a.translation
    return Pose(q, t)


def inverse(a: Pose) -> Pose:
    q = a.rotation.conjugate()
    t = -(q.to_matrix() @ a.translation)
    return Pose(q.normalized(), t)


@dataclass(frozen=True)
class Camera:
    """Pinhole intrinsics plus image size, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image dimensions must be positive")

    def matrix(self) -> np.ndarray:
        """3x3 intrinsic matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered 3D model points, metres; index is the landmark identity."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError("landmark points must have shape (N, 3)")
        if not np.all(np.isfinite(p)):
            raise ValueError("landmark points must be finite")
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class Correspondence:
    """A 2D observation paired to a landmark index."""

    landmark_index: int
    image_point: np.ndarray
    visible: bool = True

    def __post_init__(self):
        uv = np.asarray(self.image_point, dtype=float).reshape(2)
        object.__setattr__(self, "image_point", uv)
        if not np.all(np.isfinite(uv)):
            raise ValueError("image point must be finite")
        if self.landmark_index < 0:
            raise ValueError("landmark index must be non-negative")


def correspondence_arrays(correspondences, landmarks: LandmarkSet):
    """(points (n,3), observations (n,2), input positions) for the visible
    correspondences; the shared entry format of the pose solvers."""
    idx = [k for k, c in enumerate(correspondences) if c.visible]
    P = np.array([landmarks.points[correspondences[k].landmark_index] for k in idx])
    Z = np.array([correspondences[k].image_point for k in idx])
    return P.reshape(len(idx), 3), Z.reshape(len(idx), 2), np.array(idx, dtype=int)


def project_points(pose: Pose, points: np.ndarray, camera: Camera):
    """Vectorized pinhole projection of (N, 3) object points.

    Returns (uv, depth) with uv shape (N, 2).  Rows with depth <= 0 hold
    NaN; callers decide whether that is an error (see `project`) or a
    visibility/residual-cap case.
    """
    p_cam = pose.apply(np.atleast_2d(points))
    depth = p_cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * p_cam[:, 0] / depth + camera.cx
        v = camera.fy * p_cam[:, 1] / depth + camera.cy
    uv = np.stack([u, v], axis=1)
    uv[depth <= 0.0] = np.nan
    return uv, depth


def project(pose: Pose, point, camera: Camera) -> np.ndarray:
    """Project a single object point; raises CheiralityError at depth <= 0."""
    uv, depth = project_points(pose, np.asarray(point, dtype=float).reshape(1, 3), camera)
    if depth[0] <= 0.0:
        raise CheiralityError(f"point has non-positive depth {depth[0]:.6g}")
    return uv[0]


def project_landmarks(pose: Pose, landmarks: LandmarkSet, camera: Camera):
    """Project every landmark and label its visibility.

    Returns (uv, visible): uv is (N, 2) image coordinates (NaN rows for
    points behind the camera), visible is (N,) bool.  A landmark is
    visible iff its depth is positive and 0 <= u < width, 0 <= v < height.
    """
    uv, depth = project_points(pose, landmarks.points, camera)
    with np.errstate(invalid="ignore"):
        in_frame = (
            (uv[:, 0] >= 0.0)
            & (uv[:, 0] < camera.width)
            & (uv[:, 1] >= 0.0)
            & (uv[:, 1] < camera.height)
        )
    visible = (depth > 0.0) & in_frame
    return uv, visible
