"""Scripted peg-in-hole demonstrators.

Two modes.  Direct mode flies straight to the (privileged) hole center,
descends, and inserts.  Corrective mode deliberately aims wrong by
design: it approaches a point on a ring outside the worst-case hole
scatter, lands softly, and recovers the way a careful teleoperator
would: keep the normal force low, slide, and feel for the mouth.

The recovery strategy is shaped by what contact at this scale actually
feels like through a wrench estimator.  The static lateral pull toward
the hole mouth is only a fifth of a newton; sliding friction drag and
the ghost wrench from unmodeled joint friction are an order of magnitude
larger whenever anything is moving.  Chasing the attraction cue alone is
hopeless at forces a search budget allows.  What is robust is geometry
plus reaction: at a light press the tip tracks commanded slides almost
perfectly, so the search walks a logarithmic spiral (radial sink a
fixed fraction of the distance slid) that is guaranteed to pass over
the mouth, while a small correction term shifts the target opposite
the sensed lateral force.  During free sliding that term only brakes
the sweep a little; the moment the peg jams against a wall or a rim,
the reaction force points away from the obstruction and the correction
steers the target off it.  A tip drop below the surface is the capture
event.  Insertion then holds the hole axis and descends slowly, with
the same force correction easing the peg off the walls.

The spiral is also the part the behavior-cloned policies must imitate,
and it is deliberately easy to imitate: its velocity is a single-valued,
smooth function of position alone (slide along the tangent, sink
inward by a fixed fraction of the slide), identical in every demo, so
demonstrations superpose instead of contradicting each other at shared
states.  The logarithmic shape, rather than a constant-pitch one, is
what makes the cloned sweep robust: the turn spacing shrinks with the
radius, so a rollout that drifts or re-anchors keeps re-covering the
band it is in, and the inward bias stays a fixed multiple of whatever
sweep speed the clone actually realizes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import Pose
from .policy import Observation
from .sim import SceneConfig

__all__ = [
    "DemoMode",
    "DemonstratorConfig",
    "ScriptedDemonstrator",
]


class DemoMode(enum.Enum):
    """How the scripted demonstrator behaves."""

    DIRECT = "direct"
    CORRECTIVE = "corrective"


@dataclass(frozen=True)
class DemonstratorConfig:
    """Tuning knobs for the scripted demonstrator.

    Distances in metres, forces in newtons.  The defaults are tuned
    against the packaged six axis model and the default contact
    parameters; they keep peak contact forces well under the safety cap
    and corrective episodes under about 800 policy steps even when the
    spiral has to sweep all the way to its center.

    nominal_center is where the fixture drawing says the hole is: the
    corrective search anchors its approach ring and spiral there, so the
    search pattern is identical across episodes no matter where the real
    pocket landed.  When unset, the realized hole center of each episode
    is used instead, which degrades corrective demos into hole-anchored
    ones; the collection pipeline always fills it in from the scene.
    """

    ring_radius: float = 0.0042  # corrective approach point, outside 3 sigma of hole scatter
    ring_jitter: float = 0.0003  # sampled scatter of the approach point
    approach_xy_step: float = 0.0006
    approach_z_step: float = 0.0008
    approach_keep: float = 0.005  # altitude held above the table until the aim is reached
    descend_step: float = 0.0008
    descend_slow: float = 0.0002
    slow_band: float = 0.0015  # altitude band above the table where descent creeps
    contact_force: float = 0.8  # |wrench force| that counts as touching
    press_depth: float = 0.0004  # deepest allowed lean below the table while searching
    press_force: float = 0.8  # normal force the search servos its lean to, N
    press_servo_gain: float = 8e-5  # lean change per newton of force error, m/N
    spiral_slope: float = 0.035  # radial sink per unit of arc swept (logarithmic spiral)
    spiral_speed: float = 0.0003  # slide speed along the spiral, per policy step
    search_lead: float = 0.001  # tip lag that pauses the sweep instead of winding up
    r_inner: float = 0.00015  # radius clamp for the spiral advance near the center
    correction_gain: float = 5e-5  # target shift per newton of lateral force, m/N
    drop_depth: float = 0.00012  # tip sink below the table surface that counts as capture
    insert_step: float = 0.00035
    insert_force: float = 6.0  # |wrench force| above which the insertion ladder pauses
    insert_fraction: float = 0.95
    reacquire_off: float = 6.0  # off-axis threshold in clearances to resume the search
    nominal_center: tuple[float, float] | None = None  # where the hole is supposed to be

    def __post_init__(self) -> None:
        if self.ring_radius <= 0.0:
            raise ValueError("ring_radius must be positive")
        if self.nominal_center is not None and len(self.nominal_center) != 2:
            raise ValueError("nominal_center must be (x, y)")
        if self.spiral_slope <= 0.0 or self.spiral_speed <= 0.0:
            raise ValueError("spiral_slope and spiral_speed must be positive")
        if self.press_depth < self.drop_depth:
            raise ValueError("press_depth must be at least drop_depth, or capture cannot latch")
        if not 0.0 < self.insert_fraction <= 1.0:
            raise ValueError("insert_fraction must be in (0, 1]")
        if self.correction_gain < 0.0:
            raise ValueError("correction_gain must be non-negative")
        if self.search_lead <= 0.0:
            raise ValueError("search_lead must be positive")
        if self.insert_force <= 0.0:
            raise ValueError("insert_force must be positive")
        if self.press_force <= 0.0 or self.press_servo_gain < 0.0:
            raise ValueError("press_force must be positive and press_servo_gain non-negative")


class ScriptedDemonstrator:
    """Privileged scripted policy that produces insertion demonstrations.

    The demonstrator knows the true hole center (standing in for the
    operator's eyes) but in corrective mode it aims wrong on purpose and
    has to recover from the miss through contact, producing the
    contact-rich trajectories a behavior cloning stack needs.

    Instances are single-threaded and must be reset between episodes via
    :meth:`begin_episode`.
    """

    def __init__(self, mode: DemoMode, config: DemonstratorConfig | None = None):
        self.mode = mode
        self.config = config or DemonstratorConfig()
        self._scene: SceneConfig | None = None
        self._aim = np.zeros(2)
        self._center = np.zeros(2)
        self._phase = "approach"
        self._orientation: np.ndarray | None = None
        self._target: np.ndarray | None = None
        self._press_floor = 0.0
        self._press_cmd = 0.0
        self._r = 0.0
        self._theta = 0.0

    @property
    def phase(self) -> str:
        """Current phase name, for diagnostics."""
        return self._phase

    def begin_episode(self, scene: SceneConfig, seed: int) -> None:
        """Reset internal state and (in corrective mode) sample the aim bias."""
        cfg = self.config
        self._scene = scene
        self._phase = "approach"
        self._orientation = None
        self._target = None
        # both the press lean and the capture latch reference the table
        # surface itself, never a sampled touch height: first contact is a
        # bounce, and a reference taken mid-bounce poisons the whole search
        self._press_floor = scene.table_height - cfg.press_depth
        self._press_cmd = scene.table_height
        self._r = 0.0
        self._theta = 0.0
        if self.mode is DemoMode.CORRECTIVE:
            # A sampled lateral bias: instead of the hole, aim at a point on
            # a ring around the nominal center, far enough out that the
            # inward spiral from first touch sweeps over every possible
            # hole position.  The ring sits on the +x side for every demo
            # so recoveries share one approach corridor.  Everything is
            # anchored at the nominal center, not the realized hole: the
            # hole offset is exactly what the search has to discover, and
            # anchoring at the real hole would also scatter the search
            # pattern across episodes and wreck its imitability.
            nominal = np.array(
                cfg.nominal_center if cfg.nominal_center is not None else scene.hole_center,
                dtype=np.float64,
            )
            rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x9E3779B9)))
            jig = rng.uniform(-cfg.ring_jitter, cfg.ring_jitter, size=2)
            self._aim = np.array([nominal[0] + cfg.ring_radius + jig[0], nominal[1] + jig[1]])
            self._center = nominal
        else:
            self._aim = np.array(scene.hole_center, dtype=np.float64)
            self._center = np.array(scene.hole_center, dtype=np.float64)

    def _lateral_correction(self, obs: Observation) -> np.ndarray:
        """Shift opposite the sensed lateral force (reaction steering)."""
        f = obs.wrench.force
        return -self.config.correction_gain * np.array([f[0], f[1]])

    def __call__(self, obs: Observation) -> Pose:
        if self._scene is None:
            raise RuntimeError("begin_episode must be called before the first step")
        sc = self._scene
        cfg = self.config
        ee = obs.ee_pose.position
        if self._orientation is None:
            self._orientation = obs.ee_pose.orientation
            self._target = ee.copy()
        t = self._target.copy()
        insert_z = sc.table_height - cfg.insert_fraction * sc.hole_depth

        if self._phase == "approach":
            # slide over to the aim point while coming down to a low keep
            # altitude; the descent to contact starts only once aligned
            dxy = self._aim - t[:2]
            dist = float(np.hypot(dxy[0], dxy[1]))
            if dist > 1e-12:
                t[:2] += dxy * (min(dist, cfg.approach_xy_step) / dist)
            keep = sc.table_height + cfg.approach_keep
            t[2] += np.clip(keep - t[2], -cfg.approach_z_step, cfg.approach_z_step)
            if dist < 2e-4 and abs(t[2] - keep) < 5e-4:
                self._phase = "descend"

        elif self._phase == "descend":
            t[0], t[1] = self._aim
            # touch down gently: full speed high up, creep near the surface
            slow = ee[2] < sc.table_height + cfg.slow_band
            t[2] = max(t[2] - (cfg.descend_slow if slow else cfg.descend_step), insert_z)
            near = ee[2] < sc.table_height + 0.002
            touched = float(np.linalg.norm(obs.wrench.force)) > cfg.contact_force
            if near and touched:
                # touched the plate: start the inward spiral from wherever
                # the tip actually is
                rel = ee[:2] - self._center
                self._r = max(float(np.hypot(rel[0], rel[1])), cfg.r_inner)
                self._theta = math.atan2(rel[1], rel[0])
                self._phase = "search"
            elif ee[2] < sc.table_height - cfg.drop_depth:
                # straight through the mouth (direct mode): no search needed
                self._phase = "insert"

        elif self._phase == "search":
            # one spiral step: sweep along the tangent at constant speed,
            # sink inward by a fixed pitch per turn, and lean on the plate
            # lightly; the correction term steers off anything that pushes
            # back.  The sweep waits for the tip: when the tip falls behind
            # the commanded point by more than the lead budget it is caught
            # on something (usually half into the mouth), and marching on
            # would wind up the arm until it yanks the tip free, so the
            # spiral pauses and lets the standing press finish the capture.
            # A tip drop below the table surface is the capture.
            lead = float(np.hypot(t[0] - ee[0], t[1] - ee[1]))
            if lead <= cfg.search_lead:
                r_eff = max(self._r, cfg.r_inner)
                self._theta += cfg.spiral_speed / r_eff
                self._r = max(self._r - cfg.spiral_slope * cfg.spiral_speed, 0.0)
            base = self._center + self._r * np.array([math.cos(self._theta), math.sin(self._theta)])
            t[:2] = base + self._lateral_correction(obs)
            # servo the lean so the plate feels a constant light press:
            # too much normal force and the friction cone pins the slide
            # (and any snag winds up hard), too little and the tip skates
            # over the mouth without sinking.  The floor bounds runaway if
            # the estimate misbehaves; the ceiling keeps a minimal lean so
            # the drop can still latch.
            press = max(-float(obs.wrench.force[2]), 0.0)
            self._press_cmd -= cfg.press_servo_gain * (cfg.press_force - press)
            self._press_cmd = float(
                np.clip(self._press_cmd, self._press_floor, sc.table_height)
            )
            t[2] = max(self._press_cmd, insert_z)
            if ee[2] < sc.table_height - cfg.drop_depth:
                # capture: keep the press pinning the tip in the mouth (the
                # gated ladder takes over next step); relieving it here
                # would let the arm's sideways momentum pop the tip back out
                self._phase = "insert"
        elif self._phase == "insert":
            # hold the hole axis (the one place the demonstrator's
            # privileged knowledge is used after a corrective approach)
            # and descend on a force gate: any wall binding pauses the
            # ladder and lets the axis pull and the correction term ease
            # the peg off before it presses harder.  Following the tip
            # instead would park the peg against whichever wall it
            # entered along.  A capture can still be lost to a rim bounce
            # in the first steps: if the tip sits far off-axis while
            # shallow, it is grinding the plate, so resume the search a
            # little outside the current radius to re-sweep the band.
            off_axis = math.hypot(ee[0] - sc.hole_center[0], ee[1] - sc.hole_center[1])
            shallow = ee[2] > sc.table_height - 0.5 * sc.hole_depth
            if shallow and off_axis > cfg.reacquire_off * sc.clearance:
                rel = ee[:2] - self._center
                self._r = float(np.hypot(rel[0], rel[1])) + 2.0 * sc.clearance
                self._theta = math.atan2(rel[1], rel[0])
                self._phase = "search"
                t[:2] = ee[:2]
                t[2] = max(self._press_cmd, insert_z)
            else:
                t[:2] = np.array(sc.hole_center) + self._lateral_correction(obs)
                if float(np.linalg.norm(obs.wrench.force)) < cfg.insert_force:
                    t[2] = max(t[2] - cfg.insert_step, insert_z)
                if ee[2] < insert_z + 0.15 * sc.hole_depth:
                    self._phase = "hold"

        self._target = t
        return Pose(t, self._orientation)
