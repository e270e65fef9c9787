"""Damped least-squares inverse kinematics."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError
from .model import Pose, RobotModel
from .transforms import matrix_to_quat, quat_multiply, quat_conjugate, quat_to_rotvec


@dataclass(frozen=True)
class IkConfig:
    damping_lambda: float = 0.05
    max_iterations: int = 50
    position_tolerance: float = 1e-5  # meters
    orientation_tolerance: float = 1e-4  # radians
    step_clamp: float = 0.2  # max |dq_i| per iteration, radians

    def __post_init__(self):
        if not (np.isfinite(self.damping_lambda) and self.damping_lambda > 0.0):
            raise DimensionError("damping_lambda must be positive")
        if self.max_iterations < 1:
            raise DimensionError("max_iterations must be at least 1")
        if self.position_tolerance <= 0.0 or self.orientation_tolerance <= 0.0:
            raise DimensionError("tolerances must be positive")
        if not (np.isfinite(self.step_clamp) and self.step_clamp > 0.0):
            raise DimensionError("step_clamp must be positive")


@dataclass(frozen=True)
class IkResult:
    q: np.ndarray
    converged: bool
    iterations: int
    position_error: float  # meters
    orientation_error: float  # radians


def solve_ik(model: RobotModel, target: Pose, q_seed, config: IkConfig = IkConfig()) -> IkResult:
    """Iterate damped least-squares steps toward the target pose.

    Every iterate (including the seed) is clipped to the joint limits, and
    each step is scaled so no joint moves more than step_clamp. The error
    is checked before stepping, so an already-converged seed returns after
    zero iterations. On non-convergence the best iterate seen is returned
    with converged=False.
    """
    n = model.n
    lower = model.joint_lower
    upper = model.joint_upper
    q = np.clip(model.check_q(q_seed, "q_seed"), lower, upper)
    lam2 = config.damping_lambda * config.damping_lambda
    tool_p = model.tool_translation
    tool_R9 = model.tool_matrix.reshape(-1)
    q_tgt = target.orientation
    p_tgt = target.position
    p = np.empty(3)
    R9 = np.empty(9)
    J = np.empty((6, n))
    eye6 = np.eye(6)
    best_q = None
    best_score = np.inf
    best_errs = (np.inf, np.inf)
    iterations = 0
    for it in range(config.max_iterations + 1):
        _kernels.fk_jac_k(model.pack, q, tool_p, tool_R9, p, R9, J)
        e_pos = p_tgt - p
        q_cur = matrix_to_quat(R9.reshape(3, 3))
        e_rot = quat_to_rotvec(quat_multiply(q_tgt, quat_conjugate(q_cur)))
        pe = float(np.linalg.norm(e_pos))
        re = float(np.linalg.norm(e_rot))
        iterations = it
        if pe < config.position_tolerance and re < config.orientation_tolerance:
            return IkResult(q=q, converged=True, iterations=it, position_error=pe, orientation_error=re)
        score = pe / config.position_tolerance + re / config.orientation_tolerance
        if score < best_score:
            best_score = score
            best_q = q.copy()
            best_errs = (pe, re)
        if it == config.max_iterations:
            break
        e6 = np.concatenate([e_pos, e_rot])
        A = J @ J.T + lam2 * eye6
        dq = J.T @ np.linalg.solve(A, e6)
        m = float(np.max(np.abs(dq)))
        if m > config.step_clamp:
            dq *= config.step_clamp / m
        q = np.clip(q + dq, lower, upper)
    return IkResult(
        q=best_q,
        converged=False,
        iterations=iterations,
        position_error=best_errs[0],
        orientation_error=best_errs[1],
    )
