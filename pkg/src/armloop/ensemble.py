"""Action chunking with exponential temporal ensembling.

A policy emits a chunk of future pose targets every policy step. Several
chunks overlap at any given step; the executed target blends every
prediction that covers the step, weighting a prediction by exp(-m * age)
where age counts policy steps since its chunk was issued. The newest chunk
has weight 1 and older chunks decay, so fresh information dominates while
stale plans still smooth the command.

Positions blend linearly; orientations blend by sign-aligned normalized
quaternion averaging, which is well behaved for the small inter-chunk
disagreements this scheme produces.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .model import Pose
from .transforms import quat_weighted_blend


@dataclass(frozen=True)
class ActionChunk:
    """A sequence of pose targets starting at the step it was issued."""

    issued_at: int
    poses: tuple[Pose, ...]

    def __post_init__(self):
        if len(self.poses) == 0:
            raise DimensionError("chunk must contain at least one pose")
        object.__setattr__(self, "poses", tuple(self.poses))

    @property
    def horizon(self) -> int:
        return len(self.poses)

    def covers(self, step: int) -> bool:
        return self.issued_at <= step < self.issued_at + self.horizon


@dataclass
class TemporalEnsemble:
    """Blends overlapping action chunks into one executed target per step."""

    decay: float = 0.01

    _chunks: list[ActionChunk] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.decay) and self.decay >= 0.0):
            raise DimensionError("decay must be nonnegative")

    def reset(self):
        self._chunks.clear()

    def add(self, chunk: ActionChunk):
        self._chunks.append(chunk)

    @property
    def pending(self) -> int:
        return len(self._chunks)

    def weights_at(self, step: int) -> list[tuple[int, float]]:
        """(issued_at, weight) for every chunk covering the step."""
        out = []
        for c in self._chunks:
            if c.covers(step):
                age = step - c.issued_at
                out.append((c.issued_at, float(np.exp(-self.decay * age))))
        return out

    def target(self, step: int) -> Pose | None:
        """Blended target for the step; None when no chunk covers it.

        Chunks issued after the step never contribute, and chunks that can
        no longer cover any step >= this one are dropped.
        """
        self._chunks = [c for c in self._chunks if c.issued_at + c.horizon > step]
        entries = []
        for c in self._chunks:
            if c.covers(step):
                age = step - c.issued_at
                w = float(np.exp(-self.decay * age))
                entries.append((w, c.poses[age]))
        if not entries:
            return None
        wsum = sum(w for w, _ in entries)
        pos = np.zeros(3)
        for w, pose in entries:
            pos += (w / wsum) * pose.position
        quat = quat_weighted_blend([p.orientation for _, p in entries], [w for w, _ in entries])
        return Pose(position=pos, orientation=quat)
