"""Sensorless contact wrench estimation.

The external wrench is recovered from the torque residual between the
measured joint torques and the torques a clean model of the same motion
would need:

    F = pinv(J^T) (tau_measured - tau_model)

where the pseudoinverse is formed by singular value decomposition with
small singular values dropped. The estimate is the wrench the
end-effector applies to its environment, expressed in the world frame at
the end-effector origin: pressing the tool straight down onto a surface
yields a negative-z force.

Estimation is quasi-static by default (the twin acceleration term is
zero); callers that track accelerations can pass them in.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError
from .model import JointState, RobotModel, Wrench


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs for the residual wrench estimator.

    singular_value_threshold is relative to the largest singular value of
    J^T. filter_cutoff_hz of None disables the output filter; otherwise it
    must sit below the Nyquist rate of rate_hz, the frequency estimate()
    is called at. residual_deadband (N m) zeroes small per-joint residuals
    before projection.
    """

    singular_value_threshold: float = 1e-4
    filter_cutoff_hz: float | None = 20.0
    residual_deadband: float = 0.0
    rate_hz: float = 250.0

    def __post_init__(self):
        if not (np.isfinite(self.singular_value_threshold) and self.singular_value_threshold > 0.0):
            raise DimensionError("singular_value_threshold must be positive")
        if not (np.isfinite(self.rate_hz) and self.rate_hz > 0.0):
            raise DimensionError("rate_hz must be positive")
        if self.filter_cutoff_hz is not None:
            fc = self.filter_cutoff_hz
            if not (np.isfinite(fc) and 0.0 < fc < 0.5 * self.rate_hz):
                raise DimensionError("filter_cutoff_hz must lie in (0, rate_hz / 2)")
        if not (np.isfinite(self.residual_deadband) and self.residual_deadband >= 0.0):
            raise DimensionError("residual_deadband must be nonnegative")


@dataclass(frozen=True)
class WrenchEstimate:
    """One estimator output: unfiltered and filtered wrench plus diagnostics."""

    raw: Wrench
    filtered: Wrench
    residual: np.ndarray  # per-joint torque residual after deadband, N m
    condition_number: float  # sigma_max / sigma_min of J^T, inf if rank deficient


def pseudoinverse_transpose(J, threshold: float = 1e-4):
    """Moore-Penrose pseudoinverse of J^T via SVD, with its condition number.

    Singular values below threshold * sigma_max are treated as zero.
    Returns (pinv, condition_number); an all-zero J reports inf.
    """
    J = np.asarray(J, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != 6:
        raise DimensionError(f"jacobian must have shape (6, n), got {J.shape}")
    U, s, Vt = np.linalg.svd(J.T, full_matrices=False)
    smax = s[0]
    if smax <= 0.0:
        return np.zeros((6, J.shape[1])), np.inf
    cut = threshold * smax
    sinv = np.zeros_like(s)
    keep = s > cut
    sinv[keep] = 1.0 / s[keep]
    pinv = (Vt.T * sinv) @ U.T
    smin = s[-1]
    cond = np.inf if smin <= 0.0 else smax / smin
    return pinv, cond


class WrenchEstimator:
    """Stateful residual estimator bound to one (clean) robot model.

    Owns the low-pass filter state; reset() clears it so the next
    filtered output equals the raw output.
    """

    def __init__(self, model: RobotModel, config: EstimatorConfig = EstimatorConfig()):
        self.model = model
        self.config = config
        self._alpha = None
        if config.filter_cutoff_hz is not None:
            tau_c = 1.0 / (2.0 * np.pi * config.filter_cutoff_hz)
            self._alpha = 1.0 - np.exp(-1.0 / (config.rate_hz * tau_c))
        self._tool_R9 = model.tool_matrix.reshape(-1)
        self._filt = None
        self._tau_inv = np.empty(model.n)
        self._zero = np.zeros(model.n)
        self._p = np.empty(3)
        self._R9 = np.empty(9)
        self._J = np.empty((6, model.n))

    def reset(self):
        self._filt = None

    def estimate(self, state: JointState, twin_accel=None) -> WrenchEstimate:
        model = self.model
        n = model.n
        q = state.q
        v = state.v
        if q.shape != (n,) or v.shape != (n,) or state.tau.shape != (n,):
            raise DimensionError(f"state arrays must have shape ({n},)")
        accel = self._zero if twin_accel is None else model.check_q(twin_accel, "twin_accel")
        g = model.gravity
        _kernels.rnea_k(model.pack, q, v, accel, g[0], g[1], g[2], self._tau_inv)
        residual = state.tau - self._tau_inv
        db = self.config.residual_deadband
        if db > 0.0:
            residual = np.sign(residual) * np.maximum(np.abs(residual) - db, 0.0)
        _kernels.fk_jac_k(model.pack, q, model.tool_translation, self._tool_R9, self._p, self._R9, self._J)
        pinv, cond = pseudoinverse_transpose(self._J, self.config.singular_value_threshold)
        raw6 = pinv @ residual
        if self._alpha is None:
            filt6 = raw6
        elif self._filt is None:
            self._filt = raw6.copy()
            filt6 = raw6
        else:
            self._filt += self._alpha * (raw6 - self._filt)
            filt6 = self._filt
        return WrenchEstimate(
            raw=Wrench(raw6[:3], raw6[3:]),
            filtered=Wrench(filt6[:3].copy(), filt6[3:].copy()),
            residual=residual,
            condition_number=float(cond),
        )
