"""Joint-space impedance law and per-joint gain profiles.

The torque law is

    tau = B (v_des - v) + K (q_des - q) + tau_ff

clipped symmetrically to the joint torque limits. ``mit_mode_torque`` is
the same law under the gain names used by actuator vendors that expose
position/velocity/feedforward fields directly on the motor bus; it exists
to make the equivalence executable, and both entry points share one
implementation.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import DimensionError, GainsFileError
from .model import JointState, RobotModel, _vec


@dataclass(frozen=True)
class ImpedanceGains:
    """Per-joint stiffness (N m/rad) and damping (N m s/rad)."""

    stiffness: np.ndarray
    damping: np.ndarray

    def __post_init__(self):
        k = np.ascontiguousarray(self.stiffness, dtype=np.float64)
        b = np.ascontiguousarray(self.damping, dtype=np.float64)
        if k.ndim != 1 or k.shape != b.shape:
            raise DimensionError("stiffness and damping must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(b))):
            raise DimensionError("gains must be finite")
        if np.any(k <= 0.0):
            raise DimensionError("stiffness must be positive")
        if np.any(b < 0.0):
            raise DimensionError("damping must be nonnegative")
        k.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "stiffness", k)
        object.__setattr__(self, "damping", b)

    @property
    def n(self) -> int:
        return self.stiffness.shape[0]


@dataclass
class ControlTargets:
    """Desired joint state for the impedance law."""

    q_desired: np.ndarray
    v_desired: np.ndarray
    tau_feedforward: np.ndarray

    @staticmethod
    def hold(q) -> "ControlTargets":
        q = np.asarray(q, dtype=np.float64)
        return ControlTargets(q.copy(), np.zeros_like(q), np.zeros_like(q))


def impedance_torque(gains: ImpedanceGains, targets: ControlTargets, state: JointState, torque_limits) -> np.ndarray:
    """Commanded joint torques under the impedance law, saturated per joint."""
    n = gains.n
    q_des = _vec(targets.q_desired, n, "q_desired")
    v_des = _vec(targets.v_desired, n, "v_desired")
    tau_ff = _vec(targets.tau_feedforward, n, "tau_feedforward")
    q = _vec(state.q, n, "q")
    v = _vec(state.v, n, "v")
    limits = _vec(torque_limits, n, "torque_limits")
    tau = np.empty(n)
    _kernels.impedance_k(gains.stiffness, gains.damping, q_des, v_des, tau_ff, q, v, limits, tau)
    return tau


def mit_mode_torque(kp, kd, targets: ControlTargets, state: JointState, torque_limits) -> np.ndarray:
    """Motor-bus style position/velocity/feedforward command.

    Identical arithmetic to impedance_torque with kp as stiffness and kd
    as damping; provided so the two framings can be compared directly.
    """
    gains = ImpedanceGains(stiffness=np.asarray(kp, dtype=np.float64), damping=np.asarray(kd, dtype=np.float64))
    return impedance_torque(gains, targets, state, torque_limits)


def parse_gains(text: str) -> list[tuple[str, float, float]]:
    """Parse a gain profile: one ``joint NAME stiffness K damping B`` per line."""
    entries: list[tuple[str, float, float]] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] != "joint" or len(tokens) != 6 or tokens[2] != "stiffness" or tokens[4] != "damping":
            raise GainsFileError("expected: joint NAME stiffness K damping B", lineno)
        name = tokens[1]
        if name in seen:
            raise GainsFileError(f"duplicate joint {name!r}", lineno)
        seen.add(name)
        try:
            k = float(tokens[3])
            b = float(tokens[5])
        except ValueError:
            raise GainsFileError("stiffness and damping must be numbers", lineno) from None
        if not (np.isfinite(k) and k > 0.0):
            raise GainsFileError(f"joint {name!r}: stiffness must be positive", lineno)
        if not (np.isfinite(b) and b >= 0.0):
            raise GainsFileError(f"joint {name!r}: damping must be nonnegative", lineno)
        entries.append((name, k, b))
    if not entries:
        raise GainsFileError("no joint entries found")
    return entries


def gains_for_model(entries, model: RobotModel) -> ImpedanceGains:
    """Order parsed gain entries by the model's links, requiring an exact cover."""
    table = {name: (k, b) for name, k, b in entries}
    names = [l.name for l in model.links]
    missing = [n for n in names if n not in table]
    if missing:
        raise GainsFileError(f"missing gains for joints: {', '.join(missing)}")
    extra = [n for n in table if n not in names]
    if extra:
        raise GainsFileError(f"gains for unknown joints: {', '.join(extra)}")
    k = np.array([table[n][0] for n in names])
    b = np.array([table[n][1] for n in names])
    return ImpedanceGains(stiffness=k, damping=b)


def load_gains(path, model: RobotModel) -> ImpedanceGains:
    return gains_for_model(parse_gains(Path(path).read_text()), model)


def packaged_gains_path(name: str = "default") -> Path:
    import importlib.resources

    res = importlib.resources.files("armloop") / "profiles" / f"{name}.gains"
    if not res.is_file():
        raise GainsFileError(f"no packaged gain profile named {name!r}")
    return Path(str(res))


def load_packaged_gains(model: RobotModel, name: str = "default") -> ImpedanceGains:
    return load_gains(packaged_gains_path(name), model)
