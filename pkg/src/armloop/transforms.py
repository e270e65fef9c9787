"""Quaternion and small rotation helpers.

Quaternions are float64 arrays ``[w, x, y, z]`` with unit norm. All
functions return new arrays and never mutate their inputs.
"""

import numpy as np

from .errors import DimensionError

_EPS = 1e-12


def _as_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise DimensionError(f"quaternion must have shape (4,), got {q.shape}")
    return q


def quat_normalize(q) -> np.ndarray:
    q = _as_quat(q)
    n = float(np.linalg.norm(q))
    if not np.isfinite(n) or n < _EPS:
        raise DimensionError("cannot normalize a zero or non-finite quaternion")
    return q / n


def quat_conjugate(q) -> np.ndarray:
    q = _as_quat(q)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a * b (apply b's rotation first, then a's)."""
    a = _as_quat(a)
    b = _as_quat(b)
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by quaternion q."""
    q = _as_quat(q)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise DimensionError(f"vector must have shape (3,), got {v.shape}")
    w = q[0]
    u = q[1:4]
    # v' = v + 2 w (u x v) + 2 u x (u x v)
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    if axis.shape != (3,):
        raise DimensionError(f"axis must have shape (3,), got {axis.shape}")
    n = float(np.linalg.norm(axis))
    if n < _EPS:
        raise DimensionError("rotation axis must be nonzero")
    half = 0.5 * float(angle)
    return np.concatenate(([np.cos(half)], (np.sin(half) / n) * axis))


def quat_to_matrix(q) -> np.ndarray:
    q = quat_normalize(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R) -> np.ndarray:
    """Convert a rotation matrix to a unit quaternion with w >= 0."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise DimensionError(f"rotation matrix must have shape (3, 3), got {R.shape}")
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [
                0.25 * s,
                (R[2, 1] - R[1, 2]) / s,
                (R[0, 2] - R[2, 0]) / s,
                (R[1, 0] - R[0, 1]) / s,
            ]
        )
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [
                (R[2, 1] - R[1, 2]) / s,
                0.25 * s,
                (R[0, 1] + R[1, 0]) / s,
                (R[0, 2] + R[2, 0]) / s,
            ]
        )
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [
                (R[0, 2] - R[2, 0]) / s,
                (R[0, 1] + R[1, 0]) / s,
                0.25 * s,
                (R[1, 2] + R[2, 1]) / s,
            ]
        )
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [
                (R[1, 0] - R[0, 1]) / s,
                (R[0, 2] + R[2, 0]) / s,
                (R[1, 2] + R[2, 1]) / s,
                0.25 * s,
            ]
        )
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


def quat_to_rotvec(q) -> np.ndarray:
    """Rotation vector (axis * angle, radians) of q, shortest representation."""
    q = quat_normalize(q)
    if q[0] < 0.0:
        q = -q
    sin_half = float(np.linalg.norm(q[1:4]))
    if sin_half < _EPS:
        # small-angle: angle ~ 2 sin(angle/2), axis ~ xyz / sin_half
        return 2.0 * q[1:4]
    angle = 2.0 * np.arctan2(sin_half, q[0])
    return (angle / sin_half) * q[1:4]


def rotation_error(q_target, q_current) -> np.ndarray:
    """World-frame rotation vector taking q_current onto q_target."""
    return quat_to_rotvec(quat_multiply(_as_quat(q_target), quat_conjugate(q_current)))


def quat_weighted_blend(quats, weights) -> np.ndarray:
    """Blend unit quaternions by normalized weighted sum.

    Signs are aligned to the first quaternion before summing so that
    antipodal representations of the same rotation do not cancel. Weights
    must be nonnegative with a positive sum.
    """
    quats = [np.asarray(q, dtype=np.float64) for q in quats]
    weights = np.asarray(weights, dtype=np.float64)
    if len(quats) == 0:
        raise DimensionError("need at least one quaternion to blend")
    if weights.shape != (len(quats),):
        raise DimensionError("one weight per quaternion required")
    if np.any(weights < 0.0) or weights.sum() <= 0.0:
        raise DimensionError("weights must be nonnegative with positive sum")
    ref = quats[0]
    acc = np.zeros(4)
    for q, w in zip(quats, weights):
        if float(np.dot(q, ref)) < 0.0:
            q = -q
        acc = acc + w * q
    return quat_normalize(acc)
