"""Rigid-body dynamics: inverse dynamics, gravity, inertia, forward dynamics."""

import numpy as np

from . import _kernels
from .errors import DegenerateModelError
from .kinematics import link_com_positions
from .model import JointState, RobotModel

_COND_LIMIT = 1e12


def inverse_dynamics(model: RobotModel, q, v, a) -> np.ndarray:
    """Joint torques that produce acceleration a at state (q, v).

    Includes gravity, excludes any external contact.
    """
    q = model.check_q(q)
    v = model.check_q(v, "v")
    a = model.check_q(a, "a")
    tau = np.empty(model.n)
    g = model.gravity
    _kernels.rnea_k(model.pack, q, v, a, g[0], g[1], g[2], tau)
    return tau


def gravity_torque(model: RobotModel, q) -> np.ndarray:
    """Torques that hold the arm static against gravity."""
    q = model.check_q(q)
    tau = np.empty(model.n)
    g = model.gravity
    _kernels.gravity_k(model.pack, q, g[0], g[1], g[2], tau)
    return tau


def mass_matrix(model: RobotModel, q) -> np.ndarray:
    """Joint-space inertia matrix, built column by column from unit
    accelerations through inverse dynamics with gravity switched off."""
    q = model.check_q(q)
    M = np.empty((model.n, model.n))
    _kernels.mass_matrix_k(model.pack, q, M)
    return M


def coriolis_torque(model: RobotModel, q, v) -> np.ndarray:
    """Velocity-product torques C(q, v) v, gravity excluded."""
    q = model.check_q(q)
    v = model.check_q(v, "v")
    tau = np.empty(model.n)
    _kernels.rnea_k(model.pack, q, v, np.zeros(model.n), 0.0, 0.0, 0.0, tau)
    return tau


def forward_dynamics(model: RobotModel, state: JointState, tau_applied, tau_external=None) -> np.ndarray:
    """Joint accelerations from applied and external torques.

    Solves M(q) a = tau_applied + tau_external - bias(q, v) through a
    factorization of M. Raises DegenerateModelError if M is conditioned
    worse than 1e12.
    """
    q = model.check_q(state.q)
    v = model.check_q(state.v, "v")
    tau = model.check_q(tau_applied, "tau_applied").copy()
    if tau_external is not None:
        tau = tau + model.check_q(tau_external, "tau_external")
    M = mass_matrix(model, q)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise DegenerateModelError(f"mass matrix condition {cond:.3e} exceeds {_COND_LIMIT:.0e}")
    bias = np.empty(model.n)
    g = model.gravity
    _kernels.rnea_k(model.pack, q, v, np.zeros(model.n), g[0], g[1], g[2], bias)
    return np.linalg.solve(M, tau - bias)


def potential_energy(model: RobotModel, q) -> float:
    """Gravitational potential energy, zero at the world origin."""
    coms = link_com_positions(model, q)
    g = model.gravity
    total = 0.0
    for i, link in enumerate(model.links):
        total -= link.mass * float(g @ coms[i])
    return total


def kinetic_energy(model: RobotModel, q, v) -> float:
    v = model.check_q(v, "v")
    M = mass_matrix(model, q)
    return 0.5 * float(v @ M @ v)


def total_energy(model: RobotModel, q, v) -> float:
    return potential_energy(model, q) + kinetic_energy(model, q, v)
