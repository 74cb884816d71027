"""posekit: monocular 6DOF landmark pose estimation toolkit.

Core pipeline: multi-view landmark triangulation, P3P/RANSAC pose
initialization, and annealed Huber Levenberg-Marquardt pose refinement
with progressive outlier pruning, plus a synthetic benchmark harness
and the full evaluation metric suite.
"""

from .errors import (
    CheiralityError,
    DegenerateGeometryError,
    InputError,
    InsufficientDataError,
    NoConsensusError,
    NoPeakError,
    PosekitError,
    SamplingError,
)
from .geometry import (
    Camera,
    Correspondence,
    LandmarkSet,
    Pose,
    Quaternion,
    compose,
    inverse,
    project,
    project_landmarks,
    random_unit_quaternion,
)
from .defaults import default_camera, default_landmarks

__version__ = "0.1.0"
