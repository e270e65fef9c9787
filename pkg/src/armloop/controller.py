"""Dual-rate joint controller.

One controller instance runs the fast impedance loop every tick, refreshes
its gravity feedforward at a middle rate, and consumes at most one pose
target per policy period, converting it to joint space with damped
least-squares IK. Rates are fixed as integer divisors of the inner rate so
tick counting stays exact.

The pose target slot is single-producer single-consumer with capacity one:
the producer (policy, demonstrator, teleop) replaces the pending target,
the controller consumes it at the next policy tick. A policy tick with no
pending target holds the previous desired posture and counts a hold event.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError
from .ik import IkConfig, solve_ik
from .impedance import ImpedanceGains
from .model import JointState, Pose, RobotModel, Wrench


@dataclass(frozen=True)
class RateConfig:
    inner_hz: int = 2000
    gravity_hz: int = 250
    policy_hz: int = 25

    def __post_init__(self):
        for name in ("inner_hz", "gravity_hz", "policy_hz"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise DimensionError(f"{name} must be a positive integer")
        if self.inner_hz % self.gravity_hz != 0 or self.inner_hz % self.policy_hz != 0:
            raise DimensionError("inner_hz must be an integer multiple of the slower rates")
        if self.gravity_hz % self.policy_hz != 0:
            raise DimensionError("gravity_hz must be an integer multiple of policy_hz")
        if not (self.inner_hz > self.gravity_hz > self.policy_hz):
            raise DimensionError("rates must be ordered inner > gravity > policy")

    @property
    def gravity_divisor(self) -> int:
        return self.inner_hz // self.gravity_hz

    @property
    def policy_divisor(self) -> int:
        return self.inner_hz // self.policy_hz

    @property
    def dt(self) -> float:
        return 1.0 / self.inner_hz


class JointController:
    """Impedance controller with IK target consumption and gravity refresh.

    control_tick() returns an internal buffer that is rewritten on the
    next call; copy it to keep it. Telemetry counters accumulate until
    reset(): policy_consumes, target_holds, ik_failures, gravity_refreshes,
    saturated_ticks.
    """

    def __init__(
        self,
        model: RobotModel,
        gains: ImpedanceGains,
        ik_config: IkConfig | None = None,
        rates: RateConfig | None = None,
    ):
        if gains.n != model.n:
            raise DimensionError(f"gains cover {gains.n} joints, model has {model.n}")
        self.model = model
        self.gains = gains
        self.ik_config = ik_config if ik_config is not None else IkConfig()
        self.rates = rates if rates is not None else RateConfig()
        self._gdiv = self.rates.gravity_divisor
        self._pdiv = self.rates.policy_divisor
        self._limits = model.torque_limits
        self._tool_R9 = model.tool_matrix.reshape(-1)
        self._tau_out = np.zeros(model.n)
        self._tau_ff = np.zeros(model.n)
        self._grav = np.zeros(model.n)
        self._v_des = np.zeros(model.n)
        self._scratch_p = np.empty(3)
        self._scratch_R9 = np.empty(9)
        self._scratch_J = np.empty((6, model.n))
        self._pending: Pose | None = None
        self._wrench_ff: np.ndarray | None = None
        self._q_des = np.zeros(model.n)
        self.telemetry: dict[str, int] = {}
        self._reset_counters()

    def _reset_counters(self):
        self.telemetry = {
            "policy_consumes": 0,
            "target_holds": 0,
            "ik_failures": 0,
            "gravity_refreshes": 0,
            "saturated_ticks": 0,
        }

    def reset(self, q0):
        """Rearm at configuration q0: desired posture q0, fresh counters."""
        q0 = self.model.check_q(q0, "q0")
        self._q_des = q0.copy()
        self._pending = None
        self._wrench_ff = None
        g = self.model.gravity
        _kernels.gravity_k(self.model.pack, q0, g[0], g[1], g[2], self._grav)
        self._tau_ff[:] = self._grav
        self._reset_counters()

    def push_target(self, pose: Pose) -> bool:
        """Stage a pose target for the next policy tick.

        Returns False if an unconsumed target was replaced.
        """
        had_room = self._pending is None
        self._pending = pose
        return had_room

    def set_wrench_feedforward(self, wrench: Wrench | None):
        """Add J^T w to the feedforward torque, refreshed with gravity.

        The wrench is the desired end-effector force on the environment;
        pass None to clear.
        """
        self._wrench_ff = None if wrench is None else wrench.as_array()

    @property
    def desired_q(self) -> np.ndarray:
        return self._q_des.copy()

    def control_tick(self, state: JointState, tick: int) -> np.ndarray:
        """One inner-loop tick. Returns the commanded joint torques."""
        model = self.model
        if tick % self._pdiv == 0:
            self.telemetry["policy_consumes"] += 1
            pose = self._pending
            self._pending = None
            if pose is None:
                self.telemetry["target_holds"] += 1
            else:
                res = solve_ik(model, pose, self._q_des, self.ik_config)
                if res.converged:
                    self._q_des = res.q
                else:
                    self.telemetry["ik_failures"] += 1
        if tick % self._gdiv == 0:
            self.telemetry["gravity_refreshes"] += 1
            g = model.gravity
            _kernels.gravity_k(model.pack, state.q, g[0], g[1], g[2], self._grav)
            if self._wrench_ff is None:
                self._tau_ff[:] = self._grav
            else:
                _kernels.fk_jac_k(
                    model.pack, state.q, model.tool_translation, self._tool_R9,
                    self._scratch_p, self._scratch_R9, self._scratch_J,
                )
                self._tau_ff[:] = self._grav + self._scratch_J.T @ self._wrench_ff
        nsat = _kernels.impedance_k(
            self.gains.stiffness, self.gains.damping, self._q_des, self._v_des,
            self._tau_ff, state.q, state.v, self._limits, self._tau_out,
        )
        if nsat:
            self.telemetry["saturated_ticks"] += 1
        return self._tau_out
