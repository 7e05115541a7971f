"""Pure-numpy twins of the compiled kernels.

Same signatures and same results as ``gdwct.kernels._core``; used when the
compiled extension is unavailable or when GDWCT_KERNELS=python is set.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def im2col(x, k, stride, pad):
    b, c, h, w = x.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    if pad > 0:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    sb, sc, sh, sw = x.strides
    patches = as_strided(
        x,
        shape=(b, c, k, k, ho, wo),
        strides=(sb, sc, sh, sw, sh * stride, sw * stride),
    )
    return np.ascontiguousarray(patches.reshape(b, c * k * k, ho * wo))


def col2im(cols, c, h, w, k, stride, pad):
    b = cols.shape[0]
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    patches = cols.reshape(b, c, k, k, ho, wo)
    for ky in range(k):
        for kx in range(k):
            xp[:, :, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride] += patches[:, :, ky, kx]
    if pad > 0:
        return np.ascontiguousarray(xp[:, :, pad:pad + h, pad:pad + w])
    return xp


def jacobi(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n, dtype=np.float64)
    converged = False
    sweeps_used = 0
    for sweep in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max() if n > 1 else 0.0
        if off < tol:
            converged = True
            sweeps_used = sweep
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                colp, colq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq
                rowp, rowq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    lam = np.diag(a).copy()
    if not converged:
        off = np.abs(a - np.diag(np.diag(a))).max() if n > 1 else 0.0
        if off < tol:
            converged = True
            sweeps_used = max_sweeps
    return lam, v, (sweeps_used if converged else -1)
