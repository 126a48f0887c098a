# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_pykernels``."""

import numpy as np


def wrapped_displacement(src, dst, shifts):
    cdef const double[:, ::1] s = np.ascontiguousarray(src, dtype=np.float64).reshape(-1, 2)
    cdef const double[:, ::1] t = np.ascontiguousarray(dst, dtype=np.float64).reshape(-1, 2)
    cdef const double[:, ::1] w = np.ascontiguousarray(shifts, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t ns = s.shape[0], nt = t.shape[0], nw = w.shape[0]
    out = np.empty((ns, nt, 2), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t i, j, m
    cdef double dx, dy, bx, by, best, cx, cy, d2
    with nogil:
        for i in range(ns):
            for j in range(nt):
                dx = t[j, 0] - s[i, 0]
                dy = t[j, 1] - s[i, 1]
                bx = dx
                by = dy
                best = dx * dx + dy * dy
                for m in range(nw):
                    cx = dx + w[m, 0]
                    cy = dy + w[m, 1]
                    d2 = cx * cx + cy * cy
                    if d2 < best:
                        best = d2
                        bx = cx
                        by = cy
                o[i, j, 0] = bx
                o[i, j, 1] = by
    return out


def beam_gains(channels, precoders_t):
    cdef const double complex[:, :, ::1] h = np.ascontiguousarray(channels, dtype=np.complex128)
    cdef const double complex[:, :, ::1] w = np.ascontiguousarray(precoders_t, dtype=np.complex128)
    cdef Py_ssize_t nb = h.shape[0], nt = h.shape[1], nn = h.shape[2]
    cdef Py_ssize_t nk = w.shape[1]
    if w.shape[0] != nb or w.shape[2] != nn:
        raise ValueError("shape mismatch between channels and precoders")
    out = np.empty((nb, nt, nk), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t b, j, k, n
    cdef double re, im, hr, hi, wr, wi
    with nogil:
        for b in range(nb):
            for j in range(nt):
                for k in range(nk):
                    re = 0.0
                    im = 0.0
                    for n in range(nn):
                        hr = h[b, j, n].real
                        hi = h[b, j, n].imag
                        wr = w[b, k, n].real
                        wi = w[b, k, n].imag
                        # conj(h) * w
                        re = re + hr * wr + hi * wi
                        im = im + hr * wi - hi * wr
                    o[b, j, k] = re * re + im * im
    return out
