"""Demonstration episode records and their on-disk format.

One episode is one UTF-8 text file of line-delimited JSON: a header line
carrying the format version, model fingerprint, episode seed and realized
scene; one line per policy step; and a trailer line with the outcome.
Floats are serialized with repr precision so a write/read cycle returns
bit-identical values.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DemoFormatError
from .model import JointState, Pose, Wrench
from .sim import SceneConfig

DEMO_FORMAT = "armloop-demo"
DEMO_VERSION = 2

# Force magnitudes (N) at which the operator-facing haptic level steps up.
# Strictly-below counting: 6 N sits on a boundary and maps to the lower level.
HAPTIC_THRESHOLDS = (1.0, 3.0, 6.0, 10.0)


def haptic_level(force_magnitude: float) -> int:
    """Discrete haptic intensity, 0 (quiet) through 4 (saturated)."""
    if not np.isfinite(force_magnitude) or force_magnitude < 0.0:
        raise DemoFormatError(f"invalid force magnitude {force_magnitude!r}")
    level = 0
    for t in HAPTIC_THRESHOLDS:
        if force_magnitude > t:
            level += 1
    return level


@dataclass
class DemoRecord:
    """Everything the sensor side saw at one policy step, plus ground truth."""

    tick: int
    ee_pose: Pose
    commanded_target: Pose
    wrench_raw: Wrench
    wrench_filtered: Wrench
    joint: JointState
    tau_contact: np.ndarray  # per-joint torque residual vs the twin, N m
    ground_truth_wrench: Wrench
    haptic_level: int


@dataclass
class DemoEpisode:
    seed: int
    scene: SceneConfig
    records: list[DemoRecord] = field(default_factory=list)
    success: bool = False
    aborted: bool = False
    model_hash: str = ""
    mode: str = ""
    max_force: float = 0.0


def _pose_out(p: Pose) -> dict:
    return {"p": p.position.tolist(), "q": p.orientation.tolist()}


def _pose_in(d: dict) -> Pose:
    return Pose(np.array(d["p"], dtype=np.float64), np.array(d["q"], dtype=np.float64))


def _wrench_out(w: Wrench) -> list:
    return w.as_array().tolist()


def _scene_out(scene: SceneConfig) -> dict:
    return {
        "table_height": scene.table_height,
        "hole_center": list(scene.hole_center),
        "hole_half_width": scene.hole_half_width,
        "hole_depth": scene.hole_depth,
        "peg_half_width": scene.peg_half_width,
        "peg_side_height": scene.peg_side_height,
        "hole_offset_std": scene.hole_offset_std,
    }


def _scene_in(d: dict) -> SceneConfig:
    return SceneConfig(
        table_height=d["table_height"],
        hole_center=tuple(d["hole_center"]),
        hole_half_width=d["hole_half_width"],
        hole_depth=d["hole_depth"],
        peg_half_width=d["peg_half_width"],
        peg_side_height=d["peg_side_height"],
        hole_offset_std=d["hole_offset_std"],
    )


def _record_out(r: DemoRecord) -> dict:
    return {
        "t": r.tick,
        "ee": _pose_out(r.ee_pose),
        "cmd": _pose_out(r.commanded_target),
        "wr": _wrench_out(r.wrench_raw),
        "wf": _wrench_out(r.wrench_filtered),
        "q": r.joint.q.tolist(),
        "v": r.joint.v.tolist(),
        "tau": r.joint.tau.tolist(),
        "tc": r.tau_contact.tolist(),
        "gt": _wrench_out(r.ground_truth_wrench),
        "h": r.haptic_level,
    }


def _record_in(d: dict) -> DemoRecord:
    return DemoRecord(
        tick=int(d["t"]),
        ee_pose=_pose_in(d["ee"]),
        commanded_target=_pose_in(d["cmd"]),
        wrench_raw=Wrench.from_array(np.array(d["wr"], dtype=np.float64)),
        wrench_filtered=Wrench.from_array(np.array(d["wf"], dtype=np.float64)),
        joint=JointState(
            q=np.array(d["q"], dtype=np.float64),
            v=np.array(d["v"], dtype=np.float64),
            tau=np.array(d["tau"], dtype=np.float64),
        ),
        tau_contact=np.array(d["tc"], dtype=np.float64),
        ground_truth_wrench=Wrench.from_array(np.array(d["gt"], dtype=np.float64)),
        haptic_level=int(d["h"]),
    )


def write_demo(episode: DemoEpisode, path: str):
    """Write one episode as line-delimited JSON."""
    header = {
        "type": "header",
        "format": DEMO_FORMAT,
        "version": DEMO_VERSION,
        "model": episode.model_hash,
        "seed": episode.seed,
        "mode": episode.mode,
        "scene": _scene_out(episode.scene),
    }
    trailer = {
        "type": "end",
        "success": episode.success,
        "aborted": episode.aborted,
        "steps": len(episode.records),
        "max_force": episode.max_force,
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for r in episode.records:
            f.write(json.dumps(_record_out(r), sort_keys=True) + "\n")
        f.write(json.dumps(trailer, sort_keys=True) + "\n")


def read_demo(path: str) -> DemoEpisode:
    """Read one episode, validating structure line by line."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DemoFormatError("empty demo file", path=path, line=1)

    def parse(i: int) -> dict:
        try:
            d = json.loads(lines[i])
        except json.JSONDecodeError as e:
            raise DemoFormatError(f"bad JSON: {e.msg}", path=path, line=i + 1) from e
        if not isinstance(d, dict):
            raise DemoFormatError("expected a JSON object", path=path, line=i + 1)
        return d

    header = parse(0)
    if header.get("type") != "header" or header.get("format") != DEMO_FORMAT:
        raise DemoFormatError("missing demo header", path=path, line=1)
    if header.get("version") != DEMO_VERSION:
        raise DemoFormatError(
            f"unsupported demo version {header.get('version')!r}", path=path, line=1
        )
    trailer = parse(len(lines) - 1)
    if trailer.get("type") != "end":
        raise DemoFormatError("truncated episode (no end record)", path=path, line=len(lines))
    records = []
    for i in range(1, len(lines) - 1):
        d = parse(i)
        if d.get("type") is not None:
            raise DemoFormatError(f"unexpected {d['type']!r} line", path=path, line=i + 1)
        try:
            records.append(_record_in(d))
        except (KeyError, TypeError, ValueError) as e:
            raise DemoFormatError(f"malformed record: {e}", path=path, line=i + 1) from e
    if trailer.get("steps") != len(records):
        raise DemoFormatError(
            f"trailer says {trailer.get('steps')} steps but file has {len(records)}",
            path=path,
            line=len(lines),
        )
    try:
        scene = _scene_in(header["scene"])
    except (KeyError, TypeError) as e:
        raise DemoFormatError(f"malformed scene: {e}", path=path, line=1) from e
    return DemoEpisode(
        seed=int(header["seed"]),
        scene=scene,
        records=records,
        success=bool(trailer["success"]),
        aborted=bool(trailer.get("aborted", False)),
        model_hash=str(header.get("model", "")),
        mode=str(header.get("mode", "")),
        max_force=float(trailer.get("max_force", 0.0)),
    )


def write_demo_dir(episodes: list[DemoEpisode], directory: str) -> list[str]:
    """Write episodes as demo_0000.jsonl ... under directory; returns paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, ep in enumerate(episodes):
        path = os.path.join(directory, f"demo_{i:04d}.jsonl")
        write_demo(ep, path)
        paths.append(path)
    return paths


def read_demo_dir(directory: str) -> list[DemoEpisode]:
    names = sorted(n for n in os.listdir(directory) if n.endswith(".jsonl"))
    return [read_demo(os.path.join(directory, n)) for n in names]
