"""Deterministic plant simulation with a synchronized digital twin.

The plant integrates the commanded torques with semi-implicit Euler at a
fixed rate. It differs from the twin's clean model in three seeded,
configurable ways: joint friction (Coulomb plus viscous), additive
Gaussian noise on the measured torque, and an optional unmodeled payload
mass at the tool. Encoders are clean: the twin mirrors the plant's exact
joint positions and velocities whenever sync_twin() runs.

Contact: the square peg at the tool meets a table surface that carries a
square pocket. Forces are penalty springs with normal damping and
regularized Coulomb friction, evaluated at eight probe points on the peg.
Everything downstream treats the wrench the peg applies TO the
environment as the ground truth signal; pressing down reads as -z force.

Determinism: all randomness (hole placement, torque measurement noise)
derives from the episode seed alone, so equal seeds and equal command
sequences give bit-identical trajectories.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import DegenerateModelError, DimensionError, SimulationDiverged
from .model import JointState, Pose, RobotModel, Wrench
from .transforms import matrix_to_quat

_NOISE_BLOCK = 2048


@dataclass(frozen=True, kw_only=True)
class PlantConfig:
    """How the plant deviates from the clean model, plus its seed.

    The seed is mandatory; every recorded run must be reproducible.
    """

    seed: int
    torque_noise_std: float = 0.02  # N m, on measured torque only
    coulomb_friction: float = 0.05  # N m per joint
    viscous_friction: float = 0.01  # N m s/rad per joint
    payload_mass_error: float = 0.0  # kg at the tool, unknown to the twin

    def __post_init__(self):
        if not isinstance(self.seed, int):
            raise DimensionError("seed must be an integer")
        for name in ("torque_noise_std", "coulomb_friction", "viscous_friction"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0.0):
                raise DimensionError(f"{name} must be nonnegative")
        if not np.isfinite(self.payload_mass_error):
            raise DimensionError("payload_mass_error must be finite")


@dataclass(frozen=True)
class SceneConfig:
    """Table, pocket, and peg geometry. Lengths in meters, world frame.

    The pocket is square, centered at hole_center on the table surface,
    walls axis-aligned. hole_offset_std is the per-axis standard deviation
    used when an episode reset perturbs the pocket center (clamped to
    three sigma). peg_side_height is how far up from the tip the side
    probe points sit.
    """

    table_height: float = 0.025
    hole_center: tuple[float, float] = (0.435, 0.0)
    hole_half_width: float = 0.005
    hole_depth: float = 0.02
    peg_half_width: float = 0.00475
    peg_side_height: float = 0.008
    hole_offset_std: float = 0.001

    def __post_init__(self):
        for name in ("hole_half_width", "hole_depth", "peg_half_width", "peg_side_height"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise DimensionError(f"{name} must be positive")
        if not (np.isfinite(self.hole_offset_std) and self.hole_offset_std >= 0.0):
            raise DimensionError("hole_offset_std must be nonnegative")
        if self.peg_half_width >= self.hole_half_width:
            raise DimensionError("peg must be narrower than the hole")
        if len(self.hole_center) != 2:
            raise DimensionError("hole_center must be (x, y)")

    @property
    def clearance(self) -> float:
        return self.hole_half_width - self.peg_half_width

    def with_center(self, x: float, y: float) -> "SceneConfig":
        return replace(self, hole_center=(float(x), float(y)))


@dataclass(frozen=True)
class ContactParams:
    normal_stiffness: float = 5e4  # N/m
    normal_damping: float = 200.0  # N s/m
    friction_mu: float = 0.5  # tabletop (upward-facing) contacts
    wall_friction_mu: float = 1.2  # pocket walls: machined bore, never polished
    friction_v_reg: float = 1e-3  # m/s, tanh regularization width

    def __post_init__(self):
        if not (np.isfinite(self.normal_stiffness) and self.normal_stiffness > 0.0):
            raise DimensionError("normal_stiffness must be positive")
        for name in ("normal_damping", "friction_mu", "wall_friction_mu"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0.0):
                raise DimensionError(f"{name} must be nonnegative")
        if not (np.isfinite(self.friction_v_reg) and self.friction_v_reg > 0.0):
            raise DimensionError("friction_v_reg must be positive")


@dataclass(frozen=True)
class SimSnapshot:
    """Copy of the externally visible simulation state at one tick."""

    tick: int
    time: float
    plant: JointState
    ee_pose: Pose
    contact_wrench: Wrench  # on the environment
    contact_count: int


class Simulation:
    """Fixed-step plant plus twin mirror for one serial arm."""

    def __init__(
        self,
        model: RobotModel,
        plant: PlantConfig,
        scene: SceneConfig | None = None,
        contact: ContactParams | None = None,
        start_q=None,
        rate_hz: int = 2000,
    ):
        self.model = model
        self.plant_config = plant
        self.scene = scene if scene is not None else SceneConfig()
        self.contact = contact if contact is not None else ContactParams()
        self.rate_hz = int(rate_hz)
        if self.rate_hz <= 0:
            raise DimensionError("rate_hz must be positive")
        self.dt = 1.0 / self.rate_hz
        self._plant_model = model.with_payload(plant.payload_mass_error)
        self._pack = self._plant_model.pack
        self._g = model.gravity
        self._tool_p = model.tool_translation
        self._tool_R9 = model.tool_matrix.reshape(-1)
        n = model.n
        self._start_q = model.check_q(start_q, "start_q").copy() if start_q is not None else np.zeros(n)
        self._coulomb = np.full(n, plant.coulomb_friction)
        self._viscous = np.full(n, plant.viscous_friction)
        self._q = np.zeros(n)
        self._v = np.zeros(n)
        self._q_prev = np.zeros(n)
        self._v_prev = np.zeros(n)
        self._tau_obs = np.zeros(n)
        self._twin_q = np.zeros(n)
        self._twin_v = np.zeros(n)
        self._wenv = np.zeros(6)
        self._ee = np.zeros(12)
        self._aux = np.zeros(2)
        self._scene_arr = np.zeros(7)
        self._noise = None
        self._noise_i = 0
        self._rng = None
        self._tick = 0
        self.live_scene = self.scene
        self.reset_episode(plant.seed)

    # -- episode lifecycle -------------------------------------------------

    def reset_episode(self, episode_seed: int) -> SceneConfig:
        """Reseed, resample the pocket center, and rewind to the start pose.

        Returns the realized scene. Equal seeds give equal scenes and
        equal noise streams regardless of what ran before.
        """
        self._rng = np.random.default_rng(np.random.SeedSequence(episode_seed))
        sc = self.scene
        if sc.hole_offset_std > 0.0:
            s = sc.hole_offset_std
            d = np.clip(self._rng.normal(0.0, s, size=2), -3.0 * s, 3.0 * s)
            live = sc.with_center(sc.hole_center[0] + d[0], sc.hole_center[1] + d[1])
        else:
            live = sc
        self.live_scene = live
        self._scene_arr[:] = (
            live.table_height,
            live.hole_center[0],
            live.hole_center[1],
            live.hole_half_width,
            live.hole_depth,
            live.peg_half_width,
            -live.peg_side_height,  # probe z in the tool frame: up the peg is -z
        )
        self._q[:] = self._start_q
        self._v[:] = 0.0
        self._q_prev[:] = self._q
        self._v_prev[:] = 0.0
        # before the first step the torque sensor reads the holding torque
        _kernels.gravity_k(self._pack, self._q, self._g[0], self._g[1], self._g[2], self._tau_obs)
        self._wenv[:] = 0.0
        self._aux[:] = 0.0
        self._noise = None
        self._noise_i = 0
        self._tick = 0
        _kernels.fk_ee_k(self._pack, self._q, self._tool_p, self._tool_R9, self._ee[:3], self._ee[3:])
        self.sync_twin()
        return live

    def _next_noise(self) -> np.ndarray:
        if self.plant_config.torque_noise_std == 0.0:
            return _ZERO_CACHE.setdefault(self.model.n, np.zeros(self.model.n))
        if self._noise is None or self._noise_i >= _NOISE_BLOCK:
            self._noise = self._rng.normal(0.0, self.plant_config.torque_noise_std, size=(_NOISE_BLOCK, self.model.n))
            self._noise_i = 0
        row = self._noise[self._noise_i]
        self._noise_i += 1
        return row

    # -- stepping ----------------------------------------------------------

    def step(self, tau_cmd) -> None:
        """Advance one tick under commanded torques.

        The plant executes tau_cmd exactly; measurement noise lands only on
        the torque reading exposed through measured_state().
        """
        np.copyto(self._q_prev, self._q)
        np.copyto(self._v_prev, self._v)
        status = _kernels.sim_step_k(
            self._pack, self._q, self._v, tau_cmd,
            self._g[0], self._g[1], self._g[2],
            self._coulomb, self._viscous, 0.01,
            self._scene_arr, _contact_arr(self.contact), self.dt,
            self._tool_p, self._tool_R9,
            self._wenv, self._ee, self._aux,
        )
        if status == 2:
            raise DegenerateModelError("plant mass matrix lost positive definiteness")
        if status == 1:
            np.copyto(self._q, self._q_prev)
            np.copyto(self._v, self._v_prev)
            raise SimulationDiverged(
                "plant state diverged", self._tick, self._q.copy(), self._v.copy()
            )
        np.add(tau_cmd, self._next_noise(), out=self._tau_obs)
        self._tick += 1

    def sync_twin(self) -> None:
        """Mirror the plant's exact joint state into the twin."""
        np.copyto(self._twin_q, self._q)
        np.copyto(self._twin_v, self._v)

    # -- views and snapshots -------------------------------------------------

    def measured_state(self) -> JointState:
        """Live views of plant q, v and the noisy torque reading."""
        return JointState(self._q, self._v, self._tau_obs)

    def twin_state(self) -> JointState:
        """Live views of the twin mirror plus the measured torque."""
        return JointState(self._twin_q, self._twin_v, self._tau_obs)

    def ee_pose(self) -> Pose:
        """Fresh forward kinematics of the current plant configuration."""
        p = np.empty(3)
        R9 = np.empty(9)
        _kernels.fk_ee_k(self._pack, self._q, self._tool_p, self._tool_R9, p, R9)
        return Pose(position=p, orientation=matrix_to_quat(R9.reshape(3, 3)))

    @property
    def tick(self) -> int:
        return self._tick

    @property
    def time(self) -> float:
        return self._tick * self.dt

    @property
    def ground_truth_wrench(self) -> Wrench:
        """Contact wrench the peg applied to the environment, last step."""
        return Wrench(self._wenv[:3].copy(), self._wenv[3:].copy())

    @property
    def contact_count(self) -> int:
        return int(self._aux[0])

    @property
    def contact_force(self) -> float:
        """Magnitude of the contact force at the last step, newtons."""
        return float(np.sqrt(self._aux[1]))

    def snapshot(self) -> SimSnapshot:
        return SimSnapshot(
            tick=self._tick,
            time=self.time,
            plant=JointState(self._q.copy(), self._v.copy(), self._tau_obs.copy()),
            ee_pose=self.ee_pose(),
            contact_wrench=self.ground_truth_wrench,
            contact_count=self.contact_count,
        )

    def check_success(self) -> bool:
        """Peg tip at least 75% down the pocket and laterally inside it."""
        sc = self.live_scene
        p = np.empty(3)
        R9 = np.empty(9)
        _kernels.fk_ee_k(self._pack, self._q, self._tool_p, self._tool_R9, p, R9)
        if p[2] > sc.table_height - 0.75 * sc.hole_depth:
            return False
        dx = p[0] - sc.hole_center[0]
        dy = p[1] - sc.hole_center[1]
        return float(np.hypot(dx, dy)) < sc.clearance


_ZERO_CACHE: dict[int, np.ndarray] = {}
_CONTACT_CACHE: dict[ContactParams, np.ndarray] = {}


def _contact_arr(c: ContactParams) -> np.ndarray:
    arr = _CONTACT_CACHE.get(c)
    if arr is None:
        arr = np.array(
            [
                c.normal_stiffness,
                c.normal_damping,
                c.friction_mu,
                c.friction_v_reg,
                c.wall_friction_mu,
            ]
        )
        _CONTACT_CACHE[c] = arr
    return arr
