"""Stepped speech-quality stream: VAD gate, oracle estimate, smoothing.

Every ``t_h`` seconds the latest ``t_w`` window of enhanced output is split
into ``t_vad`` sub-windows; if more than 3/4 of them carry energy above the
threshold, the window is scored (SI-SDR against the time-aligned clean
reference, optionally perturbed with Gaussian noise to emulate a neural
estimator's variability) and folded into an exponentially smoothed stream.
Gated steps hold the previous smoothed value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ESTIMATORS = ("oracle", "noisy-oracle")

SI_SDR_CLAMP_DB = (-40.0, 60.0)


@dataclass(frozen=True)
class QualityConfig:
    t_h: float = 0.1
    t_w: float = 3.0
    t_vad: float = 0.032
    alpha: float = 0.9
    vad_energy_threshold_db: float = -45.0
    estimator: str = "noisy-oracle"
    noise_sigma_db: float = 2.5
    #: per-tick probability that the enhanced output window is zeroed,
    #: emulating real-time overruns
    dropout_prob: float = 0.0

    def __post_init__(self):
        if not (self.t_vad < self.t_w):
            raise ValueError("t_vad must be shorter than t_w")
        if not (0 < self.t_h <= self.t_w):
            raise ValueError("t_h must lie in (0, t_w]")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if not (self.noise_sigma_db >= 0.0):
            raise ValueError("noise_sigma_db must be >= 0")
        if not (0.0 <= self.dropout_prob <= 1.0):
            raise ValueError("dropout_prob must lie in [0, 1]")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")


@dataclass(frozen=True)
class QualitySample:
    """One quality-stream step; ``raw_q_db`` is None on VAD-gated steps and
    ``smooth_q_db`` is the last emitted value (None until the first ungated
    step)."""

    time_s: float
    raw_q_db: float | None
    smooth_q_db: float | None
    vad_active: bool
    n_act: int
    n_total: int


def vad_activity(window: np.ndarray, t_vad: float, fs: int,
                 threshold_db: float) -> tuple[int, int]:
    """Count t_vad sub-windows whose RMS (dBFS) exceeds the threshold."""
    window = np.asarray(window)
    sub = int(round(t_vad * fs))
    n_total = window.size // sub
    segments = window[: n_total * sub].reshape(n_total, sub)
    rms = np.sqrt(np.mean(segments**2, axis=1))
    db = 20.0 * np.log10(np.maximum(rms, 1e-12))
    return int(np.count_nonzero(db > threshold_db)), n_total


def gate(n_act: int, n_total: int) -> bool:
    """Open iff strictly more than 3/4 of the sub-windows are active."""
    return n_act > 0.75 * n_total


def si_sdr(estimate: np.ndarray, reference: np.ndarray,
           clamp_db: tuple[float, float] = SI_SDR_CLAMP_DB) -> float:
    """Scale-invariant SDR of ``estimate`` against ``reference``, in dB.

    The reference is scaled to the estimate's projection onto it; the ratio
    of projected to residual energy is clamped to ``clamp_db``.
    """
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if est.shape != ref.shape or est.size == 0:
        raise ValueError("estimate and reference must have equal non-zero length")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ValueError("all-zero reference (gate silence before scoring)")
    target = (float(np.dot(est, ref)) / ref_energy) * ref
    target_energy = float(np.dot(target, target))
    residual = est - target
    residual_energy = float(np.dot(residual, residual))
    lo, hi = clamp_db
    if residual_energy == 0.0:
        return hi
    if target_energy == 0.0:
        return lo
    return float(np.clip(10.0 * math.log10(target_energy / residual_energy), lo, hi))


def emulate_noise(q_db: float, rng: np.random.Generator, sigma_db: float) -> float:
    """Perturb a quality value with Gaussian noise of std ``sigma_db``."""
    if sigma_db == 0.0:
        return q_db
    return q_db + rng.normal(0.0, sigma_db)


def smooth(prev_q: float, raw_q: float, alpha: float) -> float:
    """Exponential smoothing; ``alpha`` weights the previous value, so higher
    alpha means a smoother, less responsive stream."""
    return alpha * prev_q + (1.0 - alpha) * raw_q


class QualityStream:
    """Stateful quality stream; one ``step`` per t_h of simulated time."""

    def __init__(self, config: QualityConfig, fs: int,
                 rng: np.random.Generator | None = None):
        self.config = config
        self.fs = fs
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.smooth_q: float | None = None

    def step(self, time_s: float, window: np.ndarray,
             reference: np.ndarray) -> QualitySample:
        """Score the latest t_w window against its time-aligned reference."""
        cfg = self.config
        n_act, n_total = vad_activity(window, cfg.t_vad, self.fs,
                                      cfg.vad_energy_threshold_db)
        if not gate(n_act, n_total):
            return QualitySample(time_s, None, self.smooth_q, False, n_act, n_total)
        try:
            raw = si_sdr(window, reference)
        except ValueError as exc:
            raise ValueError(f"quality step at t={time_s:.3f}s failed: {exc}") from exc
        if cfg.estimator == "noisy-oracle":
            raw = emulate_noise(raw, self.rng, cfg.noise_sigma_db)
        if self.smooth_q is None:
            self.smooth_q = raw
        else:
            self.smooth_q = smooth(self.smooth_q, raw, cfg.alpha)
        return QualitySample(time_s, raw, self.smooth_q, True, n_act, n_total)
