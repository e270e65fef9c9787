"""armloop: a compliant manipulation sandbox.

A torque-level dual-loop control stack for serial revolute arms: fast
joint-space impedance around slow pose targets, sensorless contact wrench
estimation against a synchronized digital twin, a deterministic contact
simulator for a peg-in-hole task, scripted demonstration collection,
behavior-cloned policies with chunked action ensembling, and a teleop
service with force-derived haptic feedback.
"""

from .model import JointState, LinkSpec, Pose, RobotModel, Wrench
from .modelfile import load_model, load_packaged_model, parse_model

__version__ = "0.1.0"

__all__ = [
    "JointState",
    "LinkSpec",
    "Pose",
    "RobotModel",
    "Wrench",
    "load_model",
    "load_packaged_model",
    "parse_model",
    "__version__",
]
