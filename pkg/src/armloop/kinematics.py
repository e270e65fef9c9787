"""Forward kinematics and the geometric Jacobian."""

import numpy as np

from . import _kernels
from .model import Pose, RobotModel
from .transforms import matrix_to_quat


def forward_kinematics(model: RobotModel, q) -> Pose:
    """World pose of the end-effector (tool frame) at configuration q."""
    q = model.check_q(q)
    p = np.empty(3)
    R9 = np.empty(9)
    _kernels.fk_ee_k(model.pack, q, model.tool_translation, model.tool_matrix.reshape(-1), p, R9)
    return Pose(position=p, orientation=matrix_to_quat(R9.reshape(3, 3)))


def geometric_jacobian(model: RobotModel, q) -> np.ndarray:
    """World-frame geometric Jacobian at the end-effector, shape (6, n).

    Rows 0:3 map joint rates to linear velocity, rows 3:6 to angular
    velocity. Column i is [z_i x (p_ee - o_i); z_i] for joint axis z_i
    through point o_i.
    """
    q = model.check_q(q)
    p = np.empty(3)
    R9 = np.empty(9)
    J = np.empty((6, model.n))
    _kernels.fk_jac_k(model.pack, q, model.tool_translation, model.tool_matrix.reshape(-1), p, R9, J)
    return J


def frame_origins_axes(model: RobotModel, q):
    """World origin and world rotation axis of every joint, ((n,3), (n,3))."""
    q = model.check_q(q)
    Rw = np.empty((model.n, 9))
    pw = np.empty((model.n, 3))
    axw = np.empty((model.n, 3))
    _kernels.fk_chain_k(model.pack, q, Rw, pw, axw)
    return pw, axw


def link_com_positions(model: RobotModel, q) -> np.ndarray:
    """World position of each link's center of mass, shape (n, 3)."""
    q = model.check_q(q)
    n = model.n
    Rw = np.empty((n, 9))
    pw = np.empty((n, 3))
    axw = np.empty((n, 3))
    _kernels.fk_chain_k(model.pack, q, Rw, pw, axw)
    out = np.empty((n, 3))
    for i, link in enumerate(model.links):
        R = Rw[i].reshape(3, 3)
        out[i] = pw[i] + R @ link.com
    return out


def ee_twist(model: RobotModel, q, v) -> np.ndarray:
    """End-effector twist [linear; angular] for joint rates v."""
    v = model.check_q(v, "v")
    return geometric_jacobian(model, q) @ v
