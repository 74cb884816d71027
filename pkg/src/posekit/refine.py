"""Robust nonlinear pose refinement.

`refine_pose` minimizes the Huber-robustified reprojection objective

    F(T) = sum_i L_delta( || z_i - project(T, x_i) || )

by Levenberg-Marquardt on a 6D tangent parameterization (axis-angle
rotation increment composed onto the quaternion, additive translation),
so no unit-norm constraint enters the solve.  `anneal_refine` wraps it
in a cooling loop that alternates refinement, pruning of correspondences
whose residual exceeds a threshold eps, and multiplicative cool-down of
both the Huber scale delta and eps toward configured floors.

Correspondences whose landmark falls behind the camera under the current
iterate contribute a large capped residual (RESIDUAL_CAP px) with zero
gradient instead of failing: they stop pulling on the fit and become
prunable, which lets the loop recover from bad intermediate poses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CheiralityError, DegenerateGeometryError, InsufficientDataError
from .geometry import (
    Camera,
    Correspondence,
    LandmarkSet,
    Pose,
    Quaternion,
    correspondence_arrays,
)

__all__ = [
    "AnnealSchedule",
    "IterationStats",
    "RefineResult",
    "huber_loss",
    "reprojection_residual",
    "apply_tangent",
    "robust_objective",
    "refine_pose",
    "anneal_refine",
    "RESIDUAL_CAP",
]

#: Residual assigned to behind-camera correspondences, pixels.
RESIDUAL_CAP = 1.0e4

#: Solver-internal depth floor, metres: grazing depths below this count as
#: cheirality violations so Jacobian terms (~ fx/Z^2) cannot overflow.
DEPTH_EPS = 1e-8

#: LM damping policy and stopping rules.
LM_LAMBDA0 = 1e-3
LM_LAMBDA_MAX = 1e15
LM_MAX_ITER = 50
LM_FTOL = 1e-10

#: Numerical zero for the pixel^2 objective: ~1e-10 px RMS over a dozen
#: points, far below any meaningful image measurement.
OBJECTIVE_FLOOR = 1e-20

#: Fewest correspondences a pose solve (or a pruning step) may keep.
MIN_SUPPORT = 4


def huber_loss(r: float, delta: float) -> float:
    """Quadratic for |r| <= delta, linear beyond; C1 at the boundary."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    a = abs(r)
    if a <= delta:
        return 0.5 * r * r
    return delta * a - 0.5 * delta * delta


def _huber_vec(r: np.ndarray, delta: float) -> np.ndarray:
    quad = r <= delta
    return np.where(quad, 0.5 * r * r, delta * r - 0.5 * delta * delta)


def reprojection_residual(
    pose: Pose, c: Correspondence, landmarks: LandmarkSet, camera: Camera
) -> float:
    """Pixel distance between the observation and the landmark's projection."""
    point = landmarks.points[c.landmark_index]
    Xc = pose.apply(point)
    if Xc[2] <= 0.0:
        raise CheiralityError(
            f"landmark {c.landmark_index} has non-positive depth under this pose"
        )
    u = camera.fx * Xc[0] / Xc[2] + camera.cx
    v = camera.fy * Xc[1] / Xc[2] + camera.cy
    du = c.image_point[0] - u
    dv = c.image_point[1] - v
    return float(np.hypot(du, dv))


def apply_tangent(pose: Pose, xi: np.ndarray) -> Pose:
    """Retract a 6D tangent step (rotation increment, translation delta)."""
    xi = np.asarray(xi, dtype=float).reshape(6)
    q = (Quaternion.from_rotvec(xi[:3]) * pose.rotation).normalized()
    return Pose(q, pose.translation + xi[3:])


def _project_arrays(pose: Pose, P: np.ndarray, camera: Camera):
    """Projection pieces for the solver: camera points, uv, validity mask."""
    Xc = pose.apply(P)
    depth = Xc[:, 2]
    valid = depth > DEPTH_EPS
    safe = np.where(valid, depth, 1.0)
    u = camera.fx * Xc[:, 0] / safe + camera.cx
    v = camera.fy * Xc[:, 1] / safe + camera.cy
    return Xc, np.stack([u, v], axis=1), valid


def residual_norms(pose: Pose, P: np.ndarray, Z: np.ndarray, camera: Camera):
    """Per-correspondence residual norms with behind-camera rows capped."""
    _, uv, valid = _project_arrays(pose, P, camera)
    r = np.linalg.norm(Z - uv, axis=1)
    return np.where(valid, r, RESIDUAL_CAP), valid


def _objective_terms(pose: Pose, P, Z, camera, delta):
    r, valid = residual_norms(pose, P, Z, camera)
    return float(_huber_vec(r, delta).sum()), r, valid


def _huber_weights(r: np.ndarray, delta: float) -> np.ndarray:
    """d L_delta / d r divided by r: 1 in the quadratic zone, delta/r beyond."""
    w = np.ones_like(r)
    far = r > delta
    w[far] = delta / r[far]
    return w


def _assemble_normal_equations(pose, P, Z, camera, delta):
    """Gradient, Gauss-Newton matrix and stacked Jacobian of the robust
    objective at `pose`, over the rows with positive depth.

    Residual convention f_i = project(pose, x_i) - z_i, so the exact
    gradient of sum_i L_delta(||f_i||) w.r.t. the 6D tangent (omega, dt)
    is sum_i w_i J_i^T f_i with w_i the Huber reweighting.  The rotation
    increment acts on the translation-free rotated point R p = Xc - t:
    dX/domega = -[R p]x, translation block is the identity.
    """
    Xc, uv, valid = _project_arrays(pose, P, camera)
    f = (uv - Z)[valid]
    Rp = Xc[valid] - pose.translation
    n = Rp.shape[0]

    X, Y, Zd = Xc[valid, 0], Xc[valid, 1], Xc[valid, 2]
    J_proj = np.zeros((n, 2, 3))
    J_proj[:, 0, 0] = camera.fx / Zd
    J_proj[:, 0, 2] = -camera.fx * X / Zd**2
    J_proj[:, 1, 1] = camera.fy / Zd
    J_proj[:, 1, 2] = -camera.fy * Y / Zd**2

    A = np.zeros((n, 3, 6))
    A[:, 0, 1] = Rp[:, 2]
    A[:, 0, 2] = -Rp[:, 1]
    A[:, 1, 0] = -Rp[:, 2]
    A[:, 1, 2] = Rp[:, 0]
    A[:, 2, 0] = Rp[:, 1]
    A[:, 2, 1] = -Rp[:, 0]
    A[:, :, 3:] = np.broadcast_to(np.eye(3), (n, 3, 3))

    J = np.einsum("nij,njk->nik", J_proj, A)  # (n, 2, 6)
    r = np.linalg.norm(f, axis=1)
    w = _huber_weights(r, delta)
    g = np.einsum("n,nij,ni->j", w, J, f)
    H = np.einsum("n,nij,nik->jk", w, J, J)
    return g, H, J, valid


def robust_objective(pose: Pose, P, Z, camera: Camera, delta: float):
    """Objective value and its exact gradient w.r.t. the 6D tangent at
    `pose`; capped behind-camera terms are constant with zero gradient."""
    value, _, _ = _objective_terms(pose, P, Z, camera, delta)
    g, _, _, _ = _assemble_normal_equations(pose, P, Z, camera, delta)
    return value, g


@dataclass(frozen=True)
class LMResult:
    pose: Pose
    objective: float
    converged: bool
    iterations: int


def _lm(P, Z, camera, start: Pose, delta: float) -> LMResult:
    if P.shape[0] < MIN_SUPPORT:
        raise InsufficientDataError(
            f"pose refinement needs at least {MIN_SUPPORT} correspondences, "
            f"got {P.shape[0]}"
        )
    pose = start
    F, _, valid = _objective_terms(pose, P, Z, camera, delta)
    if not valid.any():
        raise DegenerateGeometryError("all correspondences behind the camera")
    if F <= OBJECTIVE_FLOOR:
        return LMResult(pose, F, True, 0)

    g, H, J, _ = _assemble_normal_equations(pose, P, Z, camera, delta)
    if np.linalg.matrix_rank(J.reshape(-1, 6)) < 6:
        raise DegenerateGeometryError(
            "reprojection Jacobian is rank-deficient (collinear landmarks?)"
        )

    lam = LM_LAMBDA0
    for it in range(1, LM_MAX_ITER + 1):
        try:
            step = np.linalg.solve(H + lam * np.eye(6), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        candidate = apply_tangent(pose, step)
        Fc, _, _ = _objective_terms(candidate, P, Z, camera, delta)
        if Fc < F:
            accepted_drop = F - Fc
            pose, F = candidate, Fc
            lam = max(lam * 0.1, 1e-15)
            if F <= OBJECTIVE_FLOOR or accepted_drop < LM_FTOL * max(F, 1e-300):
                return LMResult(pose, F, True, it)
            g, H, _, _ = _assemble_normal_equations(pose, P, Z, camera, delta)
        else:
            lam *= 10.0
            if lam > LM_LAMBDA_MAX:
                # no descent direction at any damping: numerically stationary
                return LMResult(pose, F, True, it)
    return LMResult(pose, F, False, LM_MAX_ITER)


def refine_pose(
    correspondences,
    landmarks: LandmarkSet,
    camera: Camera,
    start: Pose,
    delta: float,
) -> LMResult:
    """Single robust LM solve at a fixed Huber scale `delta`."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    P, Z, _ = correspondence_arrays(correspondences, landmarks)
    return _lm(P, Z, camera, start, delta)


@dataclass(frozen=True)
class AnnealSchedule:
    """Cooling schedule: start values, multiplicative factors, floors, and
    the iteration count of the outer refine-prune loop."""

    delta0: float = 5.0
    eps0: float = 50.0
    delta_min: float = 1.0
    eps_min: float = 4.0
    lambda_delta: float = 0.7
    lambda_eps: float = 0.7
    t_max: int = 10

    def __post_init__(self):
        if self.delta0 <= 0 or self.eps0 <= 0:
            raise ValueError("initial delta and eps must be positive")
        if self.delta_min <= 0 or self.eps_min <= 0:
            raise ValueError("delta_min and eps_min must be positive")
        if not (0 < self.lambda_delta <= 1 and 0 < self.lambda_eps <= 1):
            raise ValueError("cooling factors must lie in (0, 1]")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")


@dataclass(frozen=True)
class IterationStats:
    """One outer iteration: thresholds used, fit quality, pruning effect."""

    iteration: int
    delta: float
    eps: float
    objective: float
    rms_residual_px: float
    n_surviving: int
    n_removed: int
    lm_converged: bool
    pose: Pose


@dataclass(frozen=True)
class RefineResult:
    pose: Pose
    surviving: list
    surviving_indices: np.ndarray
    removed_count: int
    trace: list
    final_eps: float
    converged: bool


def anneal_refine(
    correspondences,
    landmarks: LandmarkSet,
    camera: Camera,
    start: Pose,
    schedule: AnnealSchedule,
) -> RefineResult:
    """Annealed robust refinement with progressive outlier pruning.

    Runs exactly `schedule.t_max` outer iterations of: LM refinement at
    the current Huber scale, removal of correspondences whose residual
    under the new pose exceeds eps, then cooling of both thresholds.  A
    pruning step that would leave fewer than MIN_SUPPORT correspondences
    is skipped for that iteration (cooling still proceeds).  The returned
    pose is the last iterate.
    """
    P_all, Z_all, input_idx = correspondence_arrays(correspondences, landmarks)
    if P_all.shape[0] < MIN_SUPPORT:
        raise InsufficientDataError(
            f"need at least {MIN_SUPPORT} visible correspondences, "
            f"got {P_all.shape[0]}"
        )

    active = np.arange(P_all.shape[0])
    pose = start
    delta, eps = schedule.delta0, schedule.eps0
    trace: list[IterationStats] = []
    final_eps = eps
    converged = False

    for t in range(1, schedule.t_max + 1):
        lm = _lm(P_all[active], Z_all[active], camera, pose, delta)
        pose, converged = lm.pose, lm.converged

        r, _ = residual_norms(pose, P_all[active], Z_all[active], camera)
        keep = r <= eps
        final_eps = eps
        if keep.sum() >= MIN_SUPPORT:
            n_removed = int((~keep).sum())
            active = active[keep]
            r_kept = r[keep]
        else:
            n_removed = 0  # guard: pruning would exhaust the support
            r_kept = r
        trace.append(
            IterationStats(
                iteration=t,
                delta=delta,
                eps=eps,
                objective=lm.objective,
                rms_residual_px=float(np.sqrt(np.mean(r_kept**2))),
                n_surviving=int(active.size),
                n_removed=n_removed,
                lm_converged=lm.converged,
                pose=pose,
            )
        )
        delta = max(schedule.delta_min, schedule.lambda_delta * delta)
        eps = max(schedule.eps_min, schedule.lambda_eps * eps)

    surviving_positions = input_idx[active]
    return RefineResult(
        pose=pose,
        surviving=[correspondences[k] for k in surviving_positions],
        surviving_indices=surviving_positions,
        removed_count=int(input_idx.size - active.size),
        trace=trace,
        final_eps=final_eps,
        converged=converged,
    )
