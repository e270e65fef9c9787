"""Rigid-body model of a serial revolute arm and the state types built on it.

Frame conventions: every link carries a fixed transform from its parent
frame to the joint frame, a unit rotation axis expressed in the joint
frame, and inertial parameters about the link's center of mass. Link 0
attaches to the world. The tool transform maps the last link frame to the
end-effector frame; the end-effector origin is the tool contact point.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .transforms import matrix_to_quat, quat_normalize, quat_to_matrix

# Packed per-link layout consumed by the numeric kernels, 28 floats:
# [0:3] origin translation, [3:12] origin rotation row-major, [12:15] axis,
# [15] mass, [16:19] center of mass, [19:28] inertia row-major.
PACK_WIDTH = 28


def _vec(x, n: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (n,):
        raise DimensionError(f"{name} must have shape ({n},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionError(f"{name} must be finite")
    return a


def _frozen(a: np.ndarray) -> np.ndarray:
    # always copy: freezing a caller-owned buffer in place would be a rude
    # side effect
    a = np.array(a, dtype=np.float64, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Pose:
    """Position plus orientation quaternion [w, x, y, z], world frame."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(_vec(self.position, 3, "position")))
        object.__setattr__(self, "orientation", _frozen(quat_normalize(self.orientation)))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    @staticmethod
    def from_matrix(position, R) -> "Pose":
        return Pose(position=np.asarray(position, dtype=np.float64), orientation=matrix_to_quat(R))

    def translated(self, dp) -> "Pose":
        return Pose(self.position + _vec(dp, 3, "dp"), self.orientation)


@dataclass(frozen=True)
class LinkSpec:
    """One revolute link: joint placement, axis, and inertial parameters."""

    name: str
    origin_translation: np.ndarray  # parent frame -> joint frame, meters
    origin_rotation: np.ndarray  # quaternion [w, x, y, z]
    axis: np.ndarray  # unit rotation axis in the joint frame
    mass: float  # kg
    com: np.ndarray  # center of mass in the joint frame, meters
    inertia: np.ndarray  # 3x3 inertia about the com, joint frame, kg m^2
    joint_limits: np.ndarray  # [lower, upper], radians
    velocity_limit: float  # rad/s
    torque_limit: float  # N m

    def __post_init__(self):
        object.__setattr__(
            self, "origin_translation", _frozen(_vec(self.origin_translation, 3, "origin_translation"))
        )
        object.__setattr__(self, "origin_rotation", _frozen(quat_normalize(self.origin_rotation)))
        axis = _vec(self.axis, 3, "axis")
        if abs(float(np.linalg.norm(axis)) - 1.0) > 1e-6:
            raise DimensionError(f"link {self.name!r}: axis must be unit length")
        object.__setattr__(self, "axis", _frozen(axis))
        if not (np.isfinite(self.mass) and self.mass > 0.0):
            raise DimensionError(f"link {self.name!r}: mass must be positive")
        object.__setattr__(self, "com", _frozen(_vec(self.com, 3, "com")))
        inertia = np.asarray(self.inertia, dtype=np.float64)
        if inertia.shape != (3, 3):
            raise DimensionError(f"link {self.name!r}: inertia must be 3x3")
        if not np.all(np.isfinite(inertia)):
            raise DimensionError(f"link {self.name!r}: inertia must be finite")
        if np.max(np.abs(inertia - inertia.T)) > 1e-12:
            raise DimensionError(f"link {self.name!r}: inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(inertia)) <= 0.0:
            raise DimensionError(f"link {self.name!r}: inertia must be positive definite")
        object.__setattr__(self, "inertia", _frozen(inertia))
        limits = _vec(self.joint_limits, 2, "joint_limits")
        if limits[0] >= limits[1]:
            raise DimensionError(f"link {self.name!r}: joint limits must satisfy lower < upper")
        object.__setattr__(self, "joint_limits", _frozen(limits))
        if not (np.isfinite(self.velocity_limit) and self.velocity_limit > 0.0):
            raise DimensionError(f"link {self.name!r}: velocity_limit must be positive")
        if not (np.isfinite(self.torque_limit) and self.torque_limit > 0.0):
            raise DimensionError(f"link {self.name!r}: torque_limit must be positive")


@dataclass(frozen=True)
class RobotModel:
    """Immutable kinematic and dynamic description of a serial arm."""

    links: tuple[LinkSpec, ...]
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    tool_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tool_rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        links = tuple(self.links)
        if len(links) == 0:
            raise DimensionError("model needs at least one link")
        names = [l.name for l in links]
        if len(set(names)) != len(names):
            raise DimensionError("link names must be unique")
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "gravity", _frozen(_vec(self.gravity, 3, "gravity")))
        object.__setattr__(self, "tool_translation", _frozen(_vec(self.tool_translation, 3, "tool_translation")))
        object.__setattr__(self, "tool_rotation", _frozen(quat_normalize(self.tool_rotation)))
        pack = np.empty((len(links), PACK_WIDTH))
        for i, l in enumerate(links):
            pack[i, 0:3] = l.origin_translation
            pack[i, 3:12] = quat_to_matrix(l.origin_rotation).reshape(9)
            pack[i, 12:15] = l.axis
            pack[i, 15] = l.mass
            pack[i, 16:19] = l.com
            pack[i, 19:28] = l.inertia.reshape(9)
        object.__setattr__(self, "_pack", _frozen(pack))
        object.__setattr__(self, "_tool_R", _frozen(quat_to_matrix(self.tool_rotation)))

    @property
    def n(self) -> int:
        return len(self.links)

    @property
    def pack(self) -> np.ndarray:
        """Packed (n, 28) parameter array for the numeric kernels."""
        return self._pack

    @property
    def tool_matrix(self) -> np.ndarray:
        return self._tool_R

    @property
    def joint_lower(self) -> np.ndarray:
        return np.array([l.joint_limits[0] for l in self.links])

    @property
    def joint_upper(self) -> np.ndarray:
        return np.array([l.joint_limits[1] for l in self.links])

    @property
    def velocity_limits(self) -> np.ndarray:
        return np.array([l.velocity_limit for l in self.links])

    @property
    def torque_limits(self) -> np.ndarray:
        return np.array([l.torque_limit for l in self.links])

    def check_q(self, q, name: str = "q") -> np.ndarray:
        return _vec(q, self.n, name)

    def fingerprint(self) -> str:
        """Stable sha256 over all numeric parameters and link names."""
        h = hashlib.sha256()
        for l in self.links:
            h.update(l.name.encode())
            for a in (
                l.origin_translation,
                l.origin_rotation,
                l.axis,
                np.array([l.mass]),
                l.com,
                l.inertia.reshape(-1),
                l.joint_limits,
                np.array([l.velocity_limit, l.torque_limit]),
            ):
                h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
        for a in (self.gravity, self.tool_translation, self.tool_rotation):
            h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
        return h.hexdigest()

    def with_payload(self, extra_mass: float) -> "RobotModel":
        """Model with a point mass added at the tool origin.

        Used to mismodel the plant relative to its twin. extra_mass may be
        negative as long as the combined last-link mass stays positive.
        """
        if not np.isfinite(extra_mass):
            raise DimensionError("extra_mass must be finite")
        if extra_mass == 0.0:
            return self
        last = self.links[-1]
        m0 = last.mass
        mp = float(extra_mass)
        m1 = m0 + mp
        if m1 <= 0.0:
            raise DimensionError("payload would make the last link non-positive mass")
        # payload sits at the tool origin expressed in the last link frame
        cp = np.asarray(self.tool_translation, dtype=np.float64)
        c1 = (m0 * last.com + mp * cp) / m1
        def _shift(mass, r):
            rr = np.asarray(r)
            return mass * (float(rr @ rr) * np.eye(3) - np.outer(rr, rr))
        inertia1 = last.inertia + _shift(m0, last.com - c1) + _shift(mp, cp - c1)
        new_last = LinkSpec(
            name=last.name,
            origin_translation=last.origin_translation,
            origin_rotation=last.origin_rotation,
            axis=last.axis,
            mass=m1,
            com=c1,
            inertia=inertia1,
            joint_limits=last.joint_limits,
            velocity_limit=last.velocity_limit,
            torque_limit=last.torque_limit,
        )
        return RobotModel(
            links=self.links[:-1] + (new_last,),
            gravity=self.gravity,
            tool_translation=self.tool_translation,
            tool_rotation=self.tool_rotation,
        )


@dataclass
class JointState:
    """Joint positions, velocities, and measured torques at one instant.

    Arrays are shared, not copied; callers that need a snapshot should copy.
    """

    q: np.ndarray
    v: np.ndarray
    tau: np.ndarray

    @staticmethod
    def zero(n: int) -> "JointState":
        return JointState(np.zeros(n), np.zeros(n), np.zeros(n))

    def copy(self) -> "JointState":
        return JointState(self.q.copy(), self.v.copy(), self.tau.copy())


@dataclass(frozen=True)
class Wrench:
    """Force and torque, world frame, at the end-effector origin."""

    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "force", _frozen(_vec(self.force, 3, "force")))
        object.__setattr__(self, "torque", _frozen(_vec(self.torque, 3, "torque")))

    @staticmethod
    def zero() -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(w) -> "Wrench":
        w = _vec(w, 6, "wrench")
        return Wrench(w[:3], w[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    def magnitude(self) -> float:
        return float(np.linalg.norm(self.force))
