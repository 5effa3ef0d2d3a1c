# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics match ``_pykernels`` bit for bit."""

import numpy as np


def phase_mask_gains(stack, exp_cos, exp_sin, double cos_tol, double floor,
                     Py_ssize_t pass_from_bin, Py_ssize_t ref=0):
    """See ``doaloop._kernels._pykernels.phase_mask_gains``."""
    cdef double complex[:, :, :] spec = stack
    cdef const double[:, :] ecos = exp_cos
    cdef const double[:, :] esin = exp_sin
    cdef Py_ssize_t n_ch = spec.shape[0]
    cdef Py_ssize_t n_frames = spec.shape[1]
    cdef Py_ssize_t n_bins = spec.shape[2]
    out_arr = np.empty((n_frames, n_bins), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef Py_ssize_t limit = pass_from_bin if pass_from_bin < n_bins else n_bins
    cdef double ct2 = cos_tol * cos_tol
    cdef Py_ssize_t f, k, c
    cdef double ar, ai, br, bi, re, im, lhs, norm_sq
    cdef double complex zr, zc
    cdef bint ok

    for f in range(n_frames):
        for k in range(limit):
            zr = spec[ref, f, k]
            ar = zr.real
            ai = zr.imag
            ok = True
            for c in range(n_ch):
                if c == ref:
                    continue
                zc = spec[c, f, k]
                br = zc.real
                bi = zc.imag
                # z = ref * conj(other); pass iff Re(z e^{-i expected}) >= cos_tol*|z|
                re = ar * br + ai * bi
                im = ai * br - ar * bi
                lhs = re * ecos[c, k] + im * esin[c, k]
                norm_sq = re * re + im * im
                if cos_tol >= 0.0:
                    if not (lhs >= 0.0 and lhs * lhs >= ct2 * norm_sq):
                        ok = False
                        break
                else:
                    if not (lhs >= 0.0 or lhs * lhs <= ct2 * norm_sq):
                        ok = False
                        break
            out[f, k] = 1.0 if ok else floor
        for k in range(limit, n_bins):
            out[f, k] = 1.0
    return out_arr
