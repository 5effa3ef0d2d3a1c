"""Minimal RIFF/WAVE reader and writer (PCM 16-bit and IEEE float32).

The stdlib ``wave`` module cannot read float WAVs and reports errors without
positions, so this is a small hand parser; read errors name the byte offset.
"""

from __future__ import annotations

import struct

import numpy as np


class WavError(ValueError):
    """Malformed or unsupported WAV content."""


def load_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file; returns (signal, fs) with samples in [-1, 1].

    Accepts PCM 16-bit and IEEE float 32-bit, mono or multichannel (first
    channel taken).
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12:
        raise WavError(f"truncated RIFF header at byte {len(data)}: need 12 bytes")
    if data[0:4] != b"RIFF":
        raise WavError("not a RIFF file (bad magic at byte 0)")
    if data[8:12] != b"WAVE":
        raise WavError("not a WAVE file (bad form type at byte 8)")

    fmt = None
    payload = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset:offset + 4]
        (chunk_size,) = struct.unpack_from("<I", data, offset + 4)
        body = offset + 8
        if body + chunk_size > len(data):
            raise WavError(
                f"truncated chunk {chunk_id!r} at byte {offset}: "
                f"declares {chunk_size} bytes but only {len(data) - body} remain"
            )
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise WavError(f"fmt chunk at byte {offset} too short ({chunk_size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", data, body)
        elif chunk_id == b"data":
            payload = data[body:body + chunk_size]
        offset = body + chunk_size + (chunk_size & 1)
    if fmt is None:
        raise WavError(f"no fmt chunk found in {offset} bytes")
    if payload is None:
        raise WavError(f"no data chunk found in {offset} bytes")

    audio_format, channels, fs, _byte_rate, _block_align, bits = fmt
    if channels < 1:
        raise WavError("fmt chunk declares zero channels")
    if audio_format == 1 and bits == 16:
        samples = np.frombuffer(payload, dtype="<i2").astype(float) / 32768.0
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4").astype(float)
    else:
        raise WavError(
            f"unsupported encoding: format tag {audio_format} with {bits} bits "
            "(only PCM 16-bit and IEEE float 32-bit are handled)"
        )
    if channels > 1:
        samples = samples[: (samples.size // channels) * channels]
        samples = samples.reshape(-1, channels)[:, 0].copy()
    return samples, int(fs)


def save_wav(path, signal: np.ndarray, fs: int, encoding: str = "pcm16") -> None:
    """Write a mono WAV file. ``encoding`` is "pcm16" or "float32"."""
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise WavError("save_wav writes mono signals only")
    if encoding == "pcm16":
        fmt_tag, bits = 1, 16
        clipped = np.clip(x, -1.0, 32767.0 / 32768.0)
        payload = (np.round(clipped * 32768.0).astype("<i2")).tobytes()
    elif encoding == "float32":
        fmt_tag, bits = 3, 32
        payload = x.astype("<f4").tobytes()
    else:
        raise WavError(f"unknown encoding {encoding!r} (use pcm16 or float32)")
    block_align = bits // 8
    header = b"".join([
        b"RIFF",
        struct.pack("<I", 4 + 8 + 16 + 8 + len(payload)),
        b"WAVE",
        b"fmt ",
        struct.pack("<IHHIIHH", 16, fmt_tag, 1, fs, fs * block_align, block_align, bits),
        b"data",
        struct.pack("<I", len(payload)),
    ])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
