"""Adam-style DOA correction driven by a scalar quality stream.

The update keeps exponentially decayed estimates of the instantaneous quality
gradient's mean and uncentered variance and steps the steered DOA against
their ratio. Bias correction is OFF by default: the early steps are then up
to (1-beta_m)/sqrt(1-beta_v) times larger than the learning rate, which gives
the loop its initial push out of a poor estimate. The bias-corrected variant
is kept for ablation.

The quality input is converted to a minimizable value by subtracting it from
``q_ceiling``, and the previous DOA starts at 0 rather than at the estimate so
the first gradient has a usable denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CorrectorConfig:
    eta: float = 0.1
    beta_m: float = 0.9
    beta_v: float = 0.999
    #: used in BOTH the gradient denominator and the update denominator
    epsilon: float = 1e-8
    bias_correction: bool = False
    warmup_s: float = 10.0
    q_ceiling: float = 100.0

    def __post_init__(self):
        if not (self.eta > 0):
            raise ValueError("eta must be positive")
        if not (0.0 <= self.beta_m < 1.0 and 0.0 <= self.beta_v < 1.0):
            raise ValueError("beta_m and beta_v must lie in [0, 1)")
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        if not (self.warmup_s >= 0):
            raise ValueError("warmup_s must be >= 0")


@dataclass(frozen=True)
class CorrectorState:
    theta_c: float
    theta_p: float = 0.0
    q_c: float = 0.0
    q_p: float = 0.0
    grad_m: float = 0.0
    grad_v: float = 0.0
    step: int = 0


def corrector_init(theta_est: float, config: CorrectorConfig | None = None) -> CorrectorState:
    """Fresh state steered at the localization estimate; theta_p starts at 0
    to force a usable first gradient."""
    if not np.isfinite(theta_est):
        raise ValueError("theta_est must be finite")
    return CorrectorState(theta_c=float(theta_est))


def corrector_step(state: CorrectorState, q_in: float,
                   config: CorrectorConfig) -> tuple[CorrectorState, float]:
    """One correction step from the latest smoothed quality.

    Returns (new_state, steered_theta). A non-finite ``q_in`` rejects the
    step: the returned state IS the input state (callers detect the rejection
    via identity or the unchanged step count) and theta is unchanged.
    """
    if not np.isfinite(q_in):
        return state, state.theta_c
    q_p = state.q_c
    q_c = config.q_ceiling - q_in
    grad = (q_c - q_p) / (state.theta_c - state.theta_p + config.epsilon)
    grad_m = config.beta_m * state.grad_m + (1.0 - config.beta_m) * grad
    grad_v = config.beta_v * state.grad_v + (1.0 - config.beta_v) * grad * grad
    step = state.step + 1
    if config.bias_correction:
        m_hat = grad_m / (1.0 - config.beta_m**step)
        v_hat = grad_v / (1.0 - config.beta_v**step)
        theta_c = state.theta_c - config.eta * m_hat / (math.sqrt(v_hat) + config.epsilon)
    else:
        theta_c = state.theta_c - config.eta * grad_m / (math.sqrt(grad_v) + config.epsilon)
    new_state = CorrectorState(
        theta_c=theta_c,
        theta_p=state.theta_c,
        q_c=q_c,
        q_p=q_p,
        grad_m=grad_m,
        grad_v=grad_v,
        step=step,
    )
    return new_state, theta_c


def run_correction_loop(quality_source, theta_est: float, config: CorrectorConfig,
                        clock) -> list[tuple[float, float]]:
    """Drive the corrector over simulated time against a quality source.

    ``clock`` iterates tick times in seconds; ``quality_source(theta, time_s)``
    returns the latest smoothed quality for the currently steered DOA. During
    warm-up the localization estimate is emitted unchanged; afterwards one
    corrector step runs per tick. Returns the emitted (time_s, theta) series.
    """
    state = corrector_init(theta_est, config)
    trajectory = []
    for t in clock:
        if t >= config.warmup_s:
            q = quality_source(state.theta_c, t)
            state, _ = corrector_step(state, q, config)
        trajectory.append((float(t), state.theta_c))
    return trajectory
