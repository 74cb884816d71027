"""Built-in camera and landmark model used by the benchmark and as
documented fall-backs when a project file omits them.

The camera is a synthetic 1920x1200 pinhole with 1000 px focal length;
the landmark model is an 11-point target: the 8 corners of a box plus
3 antenna tips, roughly satellite-sized (about a metre across).  Both
are stand-ins: real deployments must supply their own calibration and
reconstructed model.
"""

import numpy as np

from .geometry import Camera, LandmarkSet

__all__ = ["default_camera", "default_landmarks"]


def default_camera() -> Camera:
    return Camera(fx=1000.0, fy=1000.0, cx=960.0, cy=600.0, width=1920, height=1200)


def default_landmarks() -> LandmarkSet:
    box = [
        (sx * 0.4, sy * 0.3, sz * 0.15)
        for sx in (-1.0, 1.0)
        for sy in (-1.0, 1.0)
        for sz in (-1.0, 1.0)
    ]
    antennas = [
        (0.7, 0.0, 0.25),
        (-0.2, 0.55, 0.2),
        (-0.45, -0.5, 0.3),
    ]
    return LandmarkSet(np.array(box + antennas))
