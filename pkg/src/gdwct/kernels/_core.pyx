# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: conv2d patch gather/scatter and the cyclic Jacobi sweep.

A pure-numpy twin of every function here lives in ``gdwct.kernels.python``;
the two are selected at import time by ``gdwct.kernels``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def im2col(double[:, :, :, ::1] x, int k, int stride, int pad):
    """Gather k*k patches of x[B,C,H,W] into cols[B, C*k*k, HO*WO]."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t ho = (H + 2 * pad - k) // stride + 1
    cdef Py_ssize_t wo = (W + 2 * pad - k) // stride + 1
    cols_arr = np.zeros((B, C * k * k, ho * wo), dtype=np.float64)
    cdef double[:, :, ::1] cols = cols_arr
    cdef Py_ssize_t b, c, ky, kx, oy, ox, iy, ix, row
    for b in range(B):
        for c in range(C):
            for ky in range(k):
                for kx in range(k):
                    row = (c * k + ky) * k + kx
                    for oy in range(ho):
                        iy = oy * stride + ky - pad
                        if iy < 0 or iy >= H:
                            continue
                        for ox in range(wo):
                            ix = ox * stride + kx - pad
                            if ix < 0 or ix >= W:
                                continue
                            cols[b, row, oy * wo + ox] = x[b, c, iy, ix]
    return cols_arr


def col2im(double[:, :, ::1] cols, Py_ssize_t C, Py_ssize_t H, Py_ssize_t W,
           int k, int stride, int pad):
    """Scatter-add cols[B, C*k*k, HO*WO] back onto an image of shape [B,C,H,W]."""
    cdef Py_ssize_t B = cols.shape[0]
    cdef Py_ssize_t ho = (H + 2 * pad - k) // stride + 1
    cdef Py_ssize_t wo = (W + 2 * pad - k) // stride + 1
    x_arr = np.zeros((B, C, H, W), dtype=np.float64)
    cdef double[:, :, :, ::1] x = x_arr
    cdef Py_ssize_t b, c, ky, kx, oy, ox, iy, ix, row
    for b in range(B):
        for c in range(C):
            for ky in range(k):
                for kx in range(k):
                    row = (c * k + ky) * k + kx
                    for oy in range(ho):
                        iy = oy * stride + ky - pad
                        if iy < 0 or iy >= H:
                            continue
                        for ox in range(wo):
                            ix = ox * stride + kx - pad
                            if ix < 0 or ix >= W:
                                continue
                            x[b, c, iy, ix] += cols[b, row, oy * wo + ox]
    return x_arr


def jacobi(double[:, ::1] a, double tol, int max_sweeps):
    """Cyclic Jacobi diagonalization of a symmetric matrix (modified in place).

    Returns (eigenvalues, V, sweeps) where a ~ V diag(eigenvalues) V^T.
    sweeps is -1 if the off-diagonal did not drop below tol in max_sweeps.
    """
    cdef Py_ssize_t n = a.shape[0]
    v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, i, sweep
    cdef double apq, app, aqq, theta, t, c, s, off, aip, aiq, vip, viq
    cdef int converged = 0
    cdef Py_ssize_t sweeps_used = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                if fabs(a[p, q]) > off:
                    off = fabs(a[p, q])
        if off < tol:
            converged = 1
            sweeps_used = sweep
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) < 1e-300:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[i, q] = s * aip + c * aiq
                for i in range(n):
                    aip = a[p, i]
                    aiq = a[q, i]
                    a[p, i] = c * aip - s * aiq
                    a[q, i] = s * aip + c * aiq
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
    lam = np.empty(n, dtype=np.float64)
    for i in range(n):
        lam[i] = a[i, i]
    if not converged:
        # final check: the loop may have converged exactly on the last sweep
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                if fabs(a[p, q]) > off:
                    off = fabs(a[p, q])
        if off < tol:
            converged = 1
            sweeps_used = max_sweeps
    return lam, v_arr, (sweeps_used if converged else -1)
