"""Pure-numpy implementations of the hot kernels.

Reference semantics for the compiled core in ``_core.pyx``; both backends use
the same elementary float operations in the same order, so their outputs
agree bit for bit.
"""

import numpy as np


def phase_mask_gains(stack, exp_cos, exp_sin, cos_tol, floor, pass_from_bin, ref=0):
    """Per-bin mask gains from inter-channel phase agreement.

    stack: (C, F, K) complex spectra, one row per channel.
    exp_cos, exp_sin: (C, K) cosine/sine of the expected phase of channel
        ``ref`` minus channel c for the steering DOA (row ``ref`` ignored).
    cos_tol: cosine of the phase tolerance.

    A bin passes (gain 1.0) iff for every channel the wrapped deviation
    between observed and expected phase difference is within the tolerance,
    i.e. cos(observed - expected) >= cos_tol, evaluated without trig on the
    cross-spectrum z = ref * conj(other): Re(z e^{-i expected}) >= cos_tol
    |z|. Failing bins get ``floor``; bins at or beyond ``pass_from_bin``
    always pass (no usable phase evidence above the spatial aliasing limit).
    Zero bins carry no phase evidence and pass.
    """
    n_ch, n_frames, n_bins = stack.shape
    ref_spec = stack[ref]
    ct2 = cos_tol * cos_tol
    ok = np.ones((n_frames, n_bins), dtype=bool)
    for c in range(n_ch):
        if c == ref:
            continue
        cross = ref_spec * np.conj(stack[c])
        re = cross.real
        im = cross.imag
        lhs = re * exp_cos[c] + im * exp_sin[c]
        norm_sq = re * re + im * im
        if cos_tol >= 0.0:
            ok &= (lhs >= 0.0) & (lhs * lhs >= ct2 * norm_sq)
        else:
            ok &= (lhs >= 0.0) | (lhs * lhs <= ct2 * norm_sq)
    gains = np.where(ok, 1.0, float(floor))
    if pass_from_bin < n_bins:
        gains[:, pass_from_bin:] = 1.0
    return gains
