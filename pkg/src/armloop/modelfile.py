"""Parser for the plain-text robot model format.

A model file is line oriented. ``#`` starts a comment. Blank lines are
ignored. Recognized directives:

    gravity gx gy gz
    link NAME
      origin x y z qw qx qy qz
      axis ax ay az
      mass m
      com cx cy cz
      inertia ixx iyy izz ixy ixz iyz
      limits lower upper
      velocity_limit v
      torque_limit t
    tool x y z qw qx qy qz

``link`` opens a block that runs until the next ``link``, ``tool``, or end
of file. Every link key is required exactly once. ``gravity`` and ``tool``
are optional (defaults: standard gravity down, identity tool).
"""

import importlib.resources
from pathlib import Path

import numpy as np

from .errors import ModelFileError
from .model import LinkSpec, RobotModel

_LINK_KEYS = {
    "origin": 7,
    "axis": 3,
    "mass": 1,
    "com": 3,
    "inertia": 6,
    "limits": 2,
    "velocity_limit": 1,
    "torque_limit": 1,
}


def _floats(tokens, lineno, key):
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise ModelFileError(f"{key}: expected numbers, got {tokens!r}", lineno) from None
    if not all(np.isfinite(vals)):
        raise ModelFileError(f"{key}: values must be finite", lineno)
    return vals


def _build_link(name, fields, lines, block_line):
    for key in _LINK_KEYS:
        if key not in fields:
            raise ModelFileError(f"link {name!r}: missing {key}", block_line)
    origin = fields["origin"]
    axis = np.array(fields["axis"])
    if abs(float(np.linalg.norm(axis)) - 1.0) > 1e-6:
        raise ModelFileError(f"link {name!r}: axis must be unit length", lines["axis"])
    mass = fields["mass"][0]
    if mass <= 0.0:
        raise ModelFileError(f"link {name!r}: mass must be positive", lines["mass"])
    ixx, iyy, izz, ixy, ixz, iyz = fields["inertia"]
    inertia = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
    if np.min(np.linalg.eigvalsh(inertia)) <= 0.0:
        raise ModelFileError(f"link {name!r}: inertia must be positive definite", lines["inertia"])
    lo, hi = fields["limits"]
    if lo >= hi:
        raise ModelFileError(f"link {name!r}: limits must satisfy lower < upper", lines["limits"])
    if fields["velocity_limit"][0] <= 0.0:
        raise ModelFileError(f"link {name!r}: velocity_limit must be positive", lines["velocity_limit"])
    if fields["torque_limit"][0] <= 0.0:
        raise ModelFileError(f"link {name!r}: torque_limit must be positive", lines["torque_limit"])
    qn = float(np.linalg.norm(origin[3:7]))
    if abs(qn - 1.0) > 1e-6:
        raise ModelFileError(f"link {name!r}: origin quaternion must be unit length", lines["origin"])
    return LinkSpec(
        name=name,
        origin_translation=np.array(origin[0:3]),
        origin_rotation=np.array(origin[3:7]),
        axis=axis,
        mass=mass,
        com=np.array(fields["com"]),
        inertia=inertia,
        joint_limits=np.array([lo, hi]),
        velocity_limit=fields["velocity_limit"][0],
        torque_limit=fields["torque_limit"][0],
    )


def parse_model(text: str, source: str = "<string>") -> RobotModel:
    gravity = np.array([0.0, 0.0, -9.81])
    tool = None
    links: list[LinkSpec] = []
    cur_name = None
    cur_fields: dict[str, list[float]] = {}
    cur_lines: dict[str, int] = {}
    cur_block_line = 0
    seen_gravity = False

    def close_block():
        nonlocal cur_name, cur_fields, cur_lines
        if cur_name is not None:
            links.append(_build_link(cur_name, cur_fields, cur_lines, cur_block_line))
            cur_name = None
            cur_fields = {}
            cur_lines = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        key, rest = tokens[0], tokens[1:]
        if key == "gravity":
            if seen_gravity:
                raise ModelFileError("duplicate gravity directive", lineno)
            if len(rest) != 3:
                raise ModelFileError(f"gravity takes 3 numbers, got {len(rest)}", lineno)
            gravity = np.array(_floats(rest, lineno, "gravity"))
            seen_gravity = True
        elif key == "link":
            close_block()
            if len(rest) != 1:
                raise ModelFileError("link takes exactly one name", lineno)
            cur_name = rest[0]
            cur_block_line = lineno
        elif key == "tool":
            close_block()
            if tool is not None:
                raise ModelFileError("duplicate tool directive", lineno)
            if len(rest) != 7:
                raise ModelFileError(f"tool takes 7 numbers, got {len(rest)}", lineno)
            tool = _floats(rest, lineno, "tool")
            qn = float(np.linalg.norm(tool[3:7]))
            if abs(qn - 1.0) > 1e-6:
                raise ModelFileError("tool quaternion must be unit length", lineno)
        elif key in _LINK_KEYS:
            if cur_name is None:
                raise ModelFileError(f"{key} outside of a link block", lineno)
            if key in cur_fields:
                raise ModelFileError(f"link {cur_name!r}: duplicate {key}", lineno)
            if len(rest) != _LINK_KEYS[key]:
                raise ModelFileError(
                    f"{key} takes {_LINK_KEYS[key]} numbers, got {len(rest)}", lineno
                )
            cur_fields[key] = _floats(rest, lineno, key)
            cur_lines[key] = lineno
        else:
            raise ModelFileError(f"unknown directive {key!r}", lineno)
    close_block()
    if not links:
        raise ModelFileError(f"{source}: no links defined")
    kwargs = {}
    if tool is not None:
        kwargs["tool_translation"] = np.array(tool[0:3])
        kwargs["tool_rotation"] = np.array(tool[3:7])
    return RobotModel(links=tuple(links), gravity=gravity, **kwargs)


def load_model(path) -> RobotModel:
    p = Path(path)
    return parse_model(p.read_text(), source=str(p))


def packaged_model_path(name: str) -> Path:
    """Path to a model shipped with the package, e.g. ``sixdof``."""
    res = importlib.resources.files("armloop") / "models" / f"{name}.model"
    if not res.is_file():
        raise ModelFileError(f"no packaged model named {name!r}")
    return Path(str(res))


def load_packaged_model(name: str) -> RobotModel:
    return load_model(packaged_model_path(name))
