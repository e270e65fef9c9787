"""Behavior-cloned chunk policies over three sensing ablations.

A policy is a single linear map from a lifted feature vector to a full
action chunk: the next chunk_size commanded positions, each expressed
relative to the current end-effector position. Predicting the whole
chunk directly from the live observation keeps the policy closed-loop
at every step; nothing is integrated through the model's own output.
The three feature specs differ only in which contact cue (if any) rides
along with the end-effector position:

    position  ee position only
    torque    position + per-joint contact torque (unfiltered twin residual)
    wrench    position + filtered estimated contact wrench

The feature vector is a fixed nonlinear lift of (position, cue). Smooth
altitude gates split every block into three regime copies (free-space
approach, pressing on the surface, riding below it after capture), so
the one linear map carries separate coefficients per regime without
ever branching. Two extra in-contact blocks let the map express the
demonstrated search: a unit direction about the workspace center
(constant sweep speed at any radius) and the same direction scaled by
inverse radius (a constant-pitch drift). All normalization constants
involved are estimated once from the training demos and stored with
the policy.

``cross_attention_fuse`` is a minimal single-query attention readout for
fusing a variable set of sensor tokens into one vector; it is the
building block a larger learned encoder would use in place of the fixed
feature concatenation.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import ActionChunk
from .errors import DemoFormatError, DimensionError
from .model import JointState, Pose, Wrench

FEATURE_SPECS = ("position", "torque", "wrench")

POLICY_FORMAT = "armloop-policy"
POLICY_VERSION = 2

# Ridge penalties on the contact-regime cue columns. During the surface
# sweep the dominant measured force is sliding friction, which encodes
# where the tip is already going rather than where the hole is, so the
# planar columns get a much stiffer prior than the approach and inserted
# regimes, where contact force genuinely carries state (snags, wall
# touches, seating depth). The height channel keeps its own penalty: the
# legitimate force-conditioned height behavior in the demonstrations is
# the press servo (more normal force, ease the lean), a negative
# feedback that is safe to clone, but the post-capture press rows pull
# the opposite way, and an overall positive force-to-depth gain would
# close a runaway loop (press harder, feel more force, press harder
# still) that pins the tip mid-sweep. The moderate penalty keeps the
# servo and damps the runaway direction.
CUE_SWEEP_RIDGE = 40.0
CUE_SWEEP_RIDGE_Z = 10.0


@dataclass
class Observation:
    """Sensor-side view of one policy step. Contains no ground truth."""

    step: int  # policy step index within the episode
    tick: int  # inner-loop tick the observation was taken at
    ee_pose: Pose
    wrench: Wrench  # filtered estimate
    wrench_raw: Wrench
    joint: JointState
    tau_contact: np.ndarray  # per-joint torque residual vs the twin, N m


def observation_cue(spec: str, obs: Observation) -> np.ndarray:
    """The contact cue a feature spec rides along with the position."""
    if spec == "position":
        return np.empty(0)
    if spec == "torque":
        return np.asarray(obs.tau_contact, dtype=np.float64).copy()
    if spec == "wrench":
        return obs.wrench.as_array()
    raise DimensionError(f"unknown feature spec {spec!r}")


def observation_features(spec: str, obs: Observation) -> np.ndarray:
    """Raw (un-lifted) feature vector: ee position plus the selected cue."""
    return np.concatenate([obs.ee_pose.position, observation_cue(spec, obs)])


def cross_attention_fuse(query, keys, values) -> np.ndarray:
    """Single-query scaled dot-product attention over sensor tokens.

    query (d,), keys (m, d), values (m, dv) -> (dv,). The output is a
    convex combination of the value rows.
    """
    query = np.asarray(query, dtype=np.float64)
    keys = np.asarray(keys, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if query.ndim != 1:
        raise DimensionError("query must be a vector")
    if keys.ndim != 2 or values.ndim != 2:
        raise DimensionError("keys and values must be 2-d")
    if keys.shape[0] == 0:
        raise DimensionError("need at least one token")
    if keys.shape[0] != values.shape[0]:
        raise DimensionError("keys and values must have matching row counts")
    if keys.shape[1] != query.shape[0]:
        raise DimensionError("key width must match query width")
    scores = keys @ query / np.sqrt(query.shape[0])
    scores -= scores.max()
    w = np.exp(scores)
    w /= w.sum()
    return w @ values


@dataclass(frozen=True)
class FeatureLift:
    """Fixed nonlinear lift of (position, cue) into the regression basis.

    Three altitude gates split every block into regime copies, so the
    single linear map that follows effectively holds separate
    coefficients for free-space approach (a), pressing on the surface
    (c), and riding below it after capture (i). Without the split,
    coefficients fit to one regime keep acting in the others: the
    approach leg's pull drags the surface sweep off the workpiece, and
    the sweep's advance yanks a freshly captured tip back out of the
    mouth. The gate scales are millimetric because that is the scale of
    the behavior switches in the demonstrations: the whole distance
    between "pressing on the surface" and "dropped into the mouth" is
    about a tenth of a millimeter of tip altitude.

    Each regime gets an intercept column (the bare gate value) and a z
    feature scaled to the regime's own altitude span, so the regression
    can resolve a z slope inside a band whose total extent is far below
    the global z spread. The approach regime carries the full
    standardized position (it must steer home from anywhere), and the
    inserted regime carries the plane (holding still is a planar fact).
    The contact regime deliberately has no planar linear term: its
    planar motion is expressed only through a unit radial direction
    about the workspace center (constant sweep speed at any radius) and
    that direction scaled by inverse radius (a constant-pitch drift).
    Both are bounded, so the learned sweep cannot acquire the radially
    unstable linear growth that a free planar term invites.

    All constants are estimated from the training demos once and then
    frozen, so the lift is a pure function shared by fit and rollout.
    """

    pos_mean: np.ndarray  # (3,) workspace center / scale of the demos
    pos_std: np.ndarray  # (3,)
    cue_mean: np.ndarray  # (k,) selected-cue normalization, k may be 0
    cue_std: np.ndarray  # (k,)
    z_ref: float  # demonstrated press altitude, meters
    w_contact: float = 1.2e-4  # contact-gate width, meters
    w_below: float = 1.5e-5  # below-surface switch sharpness, meters
    z_below: float = 1e-4  # below-surface switch midpoint depth, meters
    z_insert_span: float = 1e-2  # insert-regime z feature scale, meters
    rho_min: float = 0.08  # radius clamp in standardized units

    N_GEOMETRY = 14  # geometry columns precede the cue columns

    @property
    def dim(self) -> int:
        return self.N_GEOMETRY + 3 * self.cue_mean.shape[0]

    def gates(self, z: float) -> tuple[float, float, float]:
        """Regime activations (approach, contact, inserted) at altitude z."""
        d = z - self.z_ref
        g = float(np.exp(-((d / self.w_contact) ** 2)))
        below = 0.5 * (1.0 + np.tanh(-(d + self.z_below) / self.w_below))
        return (1.0 - g) * (1.0 - below), g * (1.0 - below), below

    def __call__(self, pos, cue) -> np.ndarray:
        pos = np.asarray(pos, dtype=np.float64)
        s = (pos - self.pos_mean) / self.pos_std
        rho = max(float(np.hypot(s[0], s[1])), self.rho_min)
        u = s[:2] / rho
        a, c, i = self.gates(float(pos[2]))
        d = float(pos[2]) - self.z_ref
        cue = np.asarray(cue, dtype=np.float64)
        if cue.shape != self.cue_mean.shape:
            raise DimensionError(
                f"cue width {cue.shape} does not match policy ({self.cue_mean.shape})"
            )
        cs = (cue - self.cue_mean) / self.cue_std
        return np.concatenate([
            [a, c, i],
            a * s,
            [c * d / self.w_contact],
            c * u,
            (c / rho) * u,
            [i * s[0], i * s[1], i * d / self.z_insert_span],
            a * cs,
            c * cs,
            i * cs,
        ])


@dataclass
class LinearChunkPolicy:
    """Chunk policy: one ridge map predicts the whole command chunk.

    The weights map one lifted feature vector to chunk_size stacked
    3-vector offsets, the next chunk_size commanded positions relative
    to the current end-effector position. Predicting every step of the
    chunk directly from the live observation, rather than recursively
    rolling a one-step model forward, means prediction errors never
    compound through the model's own output: each new chunk re-anchors
    at the measured tip. Orientation is the fixed task orientation
    captured at training time.
    """

    feature_spec: str
    chunk_size: int
    weights: np.ndarray  # (d, chunk_size * 3)
    feature_mean: np.ndarray  # (d,) standardization of the lifted features
    feature_std: np.ndarray  # (d,)
    target_mean: np.ndarray  # (chunk_size * 3,)
    lift: FeatureLift
    orientation: np.ndarray  # unit quaternion wxyz
    ridge_lambda: float
    trained_on: int = 0
    max_step: float = 2e-3  # clamp on consecutive chunk positions, meters

    def __post_init__(self):
        if self.feature_spec not in FEATURE_SPECS:
            raise DimensionError(f"unknown feature spec {self.feature_spec!r}")
        if self.chunk_size < 1:
            raise DimensionError("chunk_size must be at least 1")
        d = self.lift.dim
        if self.weights.shape != (d, self.chunk_size * 3):
            raise DimensionError(f"weights must have shape ({d}, {self.chunk_size * 3})")
        for name in ("feature_mean", "feature_std"):
            if getattr(self, name).shape != (d,):
                raise DimensionError(f"{name} must have shape ({d},)")
        if self.target_mean.shape != (self.chunk_size * 3,):
            raise DimensionError(f"target_mean must have shape ({self.chunk_size * 3},)")

    def rollout(self, pos, cue) -> np.ndarray:
        """(chunk_size, 3) commanded positions for the current observation.

        Consecutive positions are rate-limited to max_step so a wild
        extrapolation cannot command a jump the demos never contained.
        """
        pos = np.asarray(pos, dtype=np.float64)
        x = (self.lift(pos, cue) - self.feature_mean) / self.feature_std
        offsets = (self.target_mean + x @ self.weights).reshape(self.chunk_size, 3)
        out = np.empty_like(offsets)
        anchor = pos
        for k in range(self.chunk_size):
            step = offsets[k] - (anchor - pos)
            norm = float(np.linalg.norm(step))
            if norm > self.max_step:
                step *= self.max_step / norm
            anchor = anchor + step
            out[k] = anchor
        return out

    def predict_delta(self, pos, cue) -> np.ndarray:
        """First commanded offset at a position; the field the chunk leads with."""
        return self.rollout(pos, cue)[0] - np.asarray(pos, dtype=np.float64)

    def __call__(self, obs: Observation) -> ActionChunk:
        cue = observation_cue(self.feature_spec, obs)
        positions = self.rollout(obs.ee_pose.position, cue)
        poses = tuple(Pose(p, self.orientation) for p in positions)
        return ActionChunk(issued_at=obs.step, poses=poses)


def fit_ridge(X, Y, lam):
    """Closed-form ridge regression on standardized features.

    lam may be a scalar or a per-column vector of penalties. Normal
    equations are scaled by the sample count, so duplicating the
    dataset leaves the solution bit-for-bit unchanged. Every penalty
    must be positive; lam = 0 is refused rather than silently solving
    an ill-posed system.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DimensionError("X and Y must be 2-d with matching sample counts")
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (X.shape[1],))
    if not (np.all(np.isfinite(lam)) and np.all(lam > 0.0)):
        raise DimensionError("ridge lambda must be positive")
    if X.shape[0] < 2:
        raise DimensionError("need at least two samples")
    m = X.shape[0]
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.maximum(sd, 1e-8)
    Xs = (X - mu) / sd
    ym = Y.mean(axis=0)
    Yc = Y - ym
    A = Xs.T @ Xs / m + np.diag(lam)
    B = Xs.T @ Yc / m
    W = np.linalg.solve(A, B)
    return W, mu, sd, ym


def _lift_from_records(episodes, feature_spec: str) -> FeatureLift:
    """Estimate the lift's normalization constants from demo records.

    The planar constants are deliberately not per-axis moments.  The
    radial features only have meaning if the standardized plane is an
    isometric copy of the workspace around the goal: a per-axis scale
    would squash the demonstrated circles into ellipses (the approach
    corridor alone skews the x spread severalfold) and the unit-radial
    directions with them.  So the plane is centered on the mean final
    tip position of the demos, which for successful insertions estimates
    the nominal goal, and both axes share one RMS-radius scale taken
    from the near-surface samples the radial features are gated to.
    """
    positions = []
    finals = []
    cues = []
    for ep in episodes:
        for t, r in enumerate(ep.records):
            positions.append(r.ee_pose.position)
            obs = Observation(
                step=t, tick=r.tick, ee_pose=r.ee_pose,
                wrench=r.wrench_filtered, wrench_raw=r.wrench_raw, joint=r.joint,
                tau_contact=r.tau_contact,
            )
            cues.append(observation_cue(feature_spec, obs))
        finals.append(ep.records[-1].ee_pose.position[:2])
    P = np.asarray(positions)
    C = np.asarray(cues)
    if C.size:
        cue_mean = C.mean(axis=0)
        cue_std = np.maximum(C.std(axis=0), 1e-8)
    else:
        cue_mean = np.empty(0)
        cue_std = np.empty(0)
    center = np.asarray(finals).mean(axis=0)
    z_ref = float(np.median(P[:, 2]))
    near = np.abs(P[:, 2] - z_ref) < 1.5e-4
    radii2 = np.sum((P[near][:, :2] - center) ** 2, axis=1)
    xy_scale = max(float(np.sqrt(radii2.mean())) if radii2.size else 0.0, 1e-3)
    return FeatureLift(
        pos_mean=np.array([center[0], center[1], P[:, 2].mean()]),
        pos_std=np.array([xy_scale, xy_scale, max(float(P[:, 2].std()), 1e-8)]),
        cue_mean=cue_mean,
        cue_std=cue_std,
        z_ref=z_ref,
    )


def fit_policy(
    episodes, feature_spec: str, chunk_size: int = 25, ridge_lambda: float = 1e-4
) -> LinearChunkPolicy:
    """Fit a chunk policy on recorded demonstration episodes.

    Each record contributes one sample: lifted features at the step,
    target the next chunk_size commanded positions relative to the
    observed end-effector position (the last command repeats past the
    episode end, which is literally what the demonstrator's hold phase
    does). Fitting command offsets rather than realized motion keeps
    contact pressure in the data: while the arm presses on the surface
    the body barely moves, but the command leads it, and that lead is
    what the policy must reproduce.

    The fit runs in two ridge stages over the lift's column groups:
    geometry first, then the contact-cue columns on the residual of
    that fit. The stages are necessary because sliding friction always
    points along the direction of travel, which makes the measured
    force an excellent predictor of the next few commands; fit jointly,
    the regression leans on the cue and the policy degenerates into
    "keep sliding the way you are sliding", a straight line that never
    curves into the demonstrated sweep. Orthogonalized, the search
    pattern stays anchored to geometry and the cue carries only what
    geometry cannot explain: the reactive centering and capture
    behavior. For the same reason the cue stage applies the stiff
    CUE_SWEEP_RIDGE penalty to the contact-regime cue columns (friction
    during the sweep is direction, not information) while the approach
    and inserted regimes keep the base penalty. The result is still a
    single linear map over the full lift.

    The geometry stage is additionally fit on command-path samples
    rather than raw ticks: a record only enters stage one when the
    commanded target has moved at least a tenth of a millimeter since
    the last sample taken. The demonstrator rails its command in place
    while friction stalls the tip, and tick sampling would weight the
    learned field toward wherever the plant happens to stick. The cue
    stage keeps every tick, because how long the command dwells against
    a snag is precisely the force-conditioned behavior it exists to
    capture.
    """
    if feature_spec not in FEATURE_SPECS:
        raise DimensionError(f"unknown feature spec {feature_spec!r}")
    episodes = [ep for ep in episodes if ep.records]
    if not episodes:
        raise DemoFormatError("not enough demonstration records to fit a policy")
    lift = _lift_from_records(episodes, feature_spec)
    X = []
    Y = []
    path_sample = []
    orientation = None
    for ep in episodes:
        if orientation is None:
            orientation = ep.records[0].commanded_target.orientation.copy()
        commands = np.array([r.commanded_target.position for r in ep.records])
        n = len(ep.records)
        last_kept = None
        for t, r in enumerate(ep.records):
            obs = Observation(
                step=t, tick=r.tick, ee_pose=r.ee_pose,
                wrench=r.wrench_filtered, wrench_raw=r.wrench_raw, joint=r.joint,
                tau_contact=r.tau_contact,
            )
            X.append(lift(r.ee_pose.position, observation_cue(feature_spec, obs)))
            idx = np.minimum(np.arange(t, t + chunk_size), n - 1)
            Y.append((commands[idx] - r.ee_pose.position).ravel())
            if last_kept is None or np.linalg.norm(commands[t] - last_kept) > 1e-4:
                path_sample.append(True)
                last_kept = commands[t]
            else:
                path_sample.append(False)
    if len(X) < 2:
        raise DemoFormatError("not enough demonstration records to fit a policy")
    X = np.array(X)
    Y = np.array(Y)
    keep = np.array(path_sample)
    if keep.sum() < 2:
        keep[:] = True
    n_geo = FeatureLift.N_GEOMETRY
    W1, mu1, sd1, ym1 = fit_ridge(X[keep][:, :n_geo], Y[keep], ridge_lambda)
    if X.shape[1] > n_geo:
        resid = Y - (ym1 + ((X[:, :n_geo] - mu1) / sd1) @ W1)
        k = lift.cue_mean.shape[0]
        base = np.full(k, ridge_lambda)
        lam_xy = np.concatenate([base, np.full(k, CUE_SWEEP_RIDGE), base])
        lam_z = np.concatenate([base, np.full(k, CUE_SWEEP_RIDGE_Z), base])
        z_cols = np.arange(Y.shape[1]) % 3 == 2
        W2, mu2, sd2, ym2 = fit_ridge(X[:, n_geo:], resid, lam_xy)
        W2z, _, _, ym2z = fit_ridge(X[:, n_geo:], resid[:, z_cols], lam_z)
        W2[:, z_cols] = W2z
        ym2[z_cols] = ym2z
        W = np.vstack([W1, W2])
        mu = np.concatenate([mu1, mu2])
        sd = np.concatenate([sd1, sd2])
        ym = ym1 + ym2
    else:
        W, mu, sd, ym = W1, mu1, sd1, ym1
    return LinearChunkPolicy(
        feature_spec=feature_spec,
        chunk_size=chunk_size,
        weights=W,
        feature_mean=mu,
        feature_std=sd,
        target_mean=ym,
        lift=lift,
        orientation=orientation,
        ridge_lambda=ridge_lambda,
        trained_on=len(X),
    )


def save_policy(policy: LinearChunkPolicy, path) -> None:
    doc = {
        "format": POLICY_FORMAT,
        "version": POLICY_VERSION,
        "feature_spec": policy.feature_spec,
        "chunk_size": policy.chunk_size,
        "ridge_lambda": policy.ridge_lambda,
        "max_step": policy.max_step,
        "trained_on": policy.trained_on,
        "feature_mean": policy.feature_mean.tolist(),
        "feature_std": policy.feature_std.tolist(),
        "target_mean": policy.target_mean.tolist(),
        "orientation": policy.orientation.tolist(),
        "weights": policy.weights.tolist(),
        "lift": {
            "pos_mean": policy.lift.pos_mean.tolist(),
            "pos_std": policy.lift.pos_std.tolist(),
            "cue_mean": policy.lift.cue_mean.tolist(),
            "cue_std": policy.lift.cue_std.tolist(),
            "z_ref": policy.lift.z_ref,
            "w_contact": policy.lift.w_contact,
            "w_below": policy.lift.w_below,
            "z_below": policy.lift.z_below,
            "z_insert_span": policy.lift.z_insert_span,
            "rho_min": policy.lift.rho_min,
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_policy(path) -> LinearChunkPolicy:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise DemoFormatError(f"policy file is not valid JSON: {e}", path=p) from None
    if doc.get("format") != POLICY_FORMAT:
        raise DemoFormatError("not a policy file", path=p)
    if doc.get("version") != POLICY_VERSION:
        raise DemoFormatError(f"unsupported policy version {doc.get('version')!r}", path=p)
    lf = doc["lift"]
    lift = FeatureLift(
        pos_mean=np.array(lf["pos_mean"], dtype=np.float64),
        pos_std=np.array(lf["pos_std"], dtype=np.float64),
        cue_mean=np.array(lf["cue_mean"], dtype=np.float64),
        cue_std=np.array(lf["cue_std"], dtype=np.float64),
        z_ref=float(lf["z_ref"]),
        w_contact=float(lf["w_contact"]),
        w_below=float(lf["w_below"]),
        z_below=float(lf["z_below"]),
        z_insert_span=float(lf["z_insert_span"]),
        rho_min=float(lf["rho_min"]),
    )
    return LinearChunkPolicy(
        feature_spec=doc["feature_spec"],
        chunk_size=int(doc["chunk_size"]),
        weights=np.array(doc["weights"], dtype=np.float64),
        feature_mean=np.array(doc["feature_mean"], dtype=np.float64),
        feature_std=np.array(doc["feature_std"], dtype=np.float64),
        target_mean=np.array(doc["target_mean"], dtype=np.float64),
        lift=lift,
        orientation=np.array(doc["orientation"], dtype=np.float64),
        ridge_lambda=float(doc["ridge_lambda"]),
        trained_on=int(doc.get("trained_on", 0)),
        max_step=float(doc.get("max_step", 2e-3)),
    )
