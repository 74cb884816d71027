"""Exception hierarchy shared by all posekit modules.

The CLI maps these onto its exit-code contract, the HTTP service onto
response codes; library users can catch `PosekitError` for everything.
"""


class PosekitError(Exception):
    """Base class for all posekit failures."""


class CheiralityError(PosekitError):
    """A point lies at non-positive depth in front of the camera."""


class DegenerateGeometryError(PosekitError):
    """Input geometry does not determine a solution (collinear points,
    near-parallel rays, rank-deficient normal equations, ...)."""


class InsufficientDataError(DegenerateGeometryError):
    """Fewer observations/correspondences than the problem needs."""


class NoConsensusError(PosekitError):
    """RANSAC found no hypothesis with a minimal supporting inlier set."""


class NoPeakError(PosekitError):
    """A heatmap is constant and has no decodable peak."""


class InputError(PosekitError):
    """Input data is internally inconsistent (broken references,
    duplicate keys, malformed sections)."""


class SamplingError(PosekitError):
    """Rejection sampling failed to produce a valid draw within the
    attempt budget; the configuration is likely infeasible."""
