"""Windowed STFT analysis/synthesis with weighted overlap-add.

Periodic Hann analysis window, 75% overlap (hop = window/4), synthesis via
window-weighted overlap-add normalized by the accumulated squared window, so
reconstruction is exact wherever the window coverage is complete.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_WINDOW_LEN = 1024  # 0.064 s at 16 kHz
DEFAULT_FS = 16000


@dataclass(frozen=True, eq=False)
class TimeFrequencyGrid:
    """Complex STFT coefficients for one channel, (frames, bins)."""

    data: np.ndarray
    window_len: int
    hop: int
    fs: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("grid data must be (frames, bins) with frames >= 1")
        if data.shape[1] != self.window_len // 2 + 1:
            raise ValueError(
                f"bins {data.shape[1]} inconsistent with window_len {self.window_len}"
            )
        if self.hop <= 0 or self.window_len % self.hop != 0:
            raise ValueError("hop must divide window_len")
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def bins(self) -> int:
        return self.data.shape[1]

    def frame_times(self) -> np.ndarray:
        """Start time of each frame in seconds."""
        return np.arange(self.frames) * (self.hop / self.fs)

    def bin_freqs(self) -> np.ndarray:
        return np.fft.rfftfreq(self.window_len, 1.0 / self.fs)


def hann_window(window_len: int) -> np.ndarray:
    """Periodic Hann window (COLA at hop = window_len/4)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window_len) / window_len)


def stft(signal: np.ndarray, window_len: int = DEFAULT_WINDOW_LEN,
         hop: int | None = None, fs: int = DEFAULT_FS) -> TimeFrequencyGrid:
    """Hann-windowed STFT; frame t bin k is the rfft of the windowed segment
    starting at t*hop."""
    x = np.asarray(signal, dtype=float)
    if window_len < 2 or window_len & (window_len - 1):
        raise ValueError("window_len must be a power of two")
    if hop is None:
        hop = window_len // 4
    if hop * 4 != window_len:
        raise ValueError("hop must be window_len/4")
    if x.ndim != 1 or x.size < window_len:
        raise ValueError(f"signal shorter than one window ({x.size} < {window_len})")
    frames = 1 + (x.size - window_len) // hop
    idx = hop * np.arange(frames)[:, None] + np.arange(window_len)
    segments = x[idx] * hann_window(window_len)
    return TimeFrequencyGrid(np.fft.rfft(segments, axis=1), window_len, hop, fs)


def ola_denominator(frames: int, window_len: int, hop: int) -> np.ndarray:
    """Accumulated squared synthesis window over the overlap-add output."""
    win_sq = hann_window(window_len) ** 2
    out = np.zeros((frames - 1) * hop + window_len)
    for t in range(frames):
        out[t * hop:t * hop + window_len] += win_sq
    return out


def synthesis_frames(data: np.ndarray, window_len: int) -> np.ndarray:
    """Windowed time-domain frames ready for overlap-add."""
    return np.fft.irfft(data, n=window_len, axis=1) * hann_window(window_len)


def istft(grid: TimeFrequencyGrid) -> np.ndarray:
    """Weighted overlap-add synthesis; output length (frames-1)*hop + window_len."""
    data = np.asarray(grid.data)
    if data.ndim != 2 or data.shape[1] != grid.window_len // 2 + 1:
        raise ValueError("grid dimensions inconsistent with its window_len")
    frames = synthesis_frames(data, grid.window_len)
    out = np.zeros((grid.frames - 1) * grid.hop + grid.window_len)
    for t in range(grid.frames):
        out[t * grid.hop:t * grid.hop + grid.window_len] += frames[t]
    den = ola_denominator(grid.frames, grid.window_len, grid.hop)
    return out / np.maximum(den, 1e-12)
