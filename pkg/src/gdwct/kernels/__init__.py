"""Kernel backend selection.

The conv2d patch gather/scatter and the Jacobi eigensolver sweep dominate
runtime; both exist as a compiled Cython extension and a pure-numpy twin.
The compiled backend is preferred; set GDWCT_KERNELS=python to force the
fallback (GDWCT_KERNELS=compiled raises if the extension is missing).
"""

import os

import numpy as np

from . import python as _python

_requested = os.environ.get("GDWCT_KERNELS", "auto")
if _requested not in ("auto", "compiled", "python"):
    raise ValueError(f"GDWCT_KERNELS must be auto|compiled|python, got {_requested!r}")

_impl = _python
BACKEND = "python"
if _requested != "python":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise


def backend_for(name):
    """Return the kernel module for an explicit backend name."""
    if name == "python":
        return _python
    if name == "compiled":
        if BACKEND != "compiled":
            raise ImportError("compiled kernel extension is not available")
        return _impl
    raise ValueError(f"unknown backend {name!r}")


def im2col(x, k, stride, pad, impl=None):
    x = np.ascontiguousarray(x, dtype=np.float64)
    return (impl or _impl).im2col(x, k, stride, pad)


def col2im(cols, c, h, w, k, stride, pad, impl=None):
    cols = np.ascontiguousarray(cols, dtype=np.float64)
    return (impl or _impl).col2im(cols, c, h, w, k, stride, pad)


def jacobi(a, tol, max_sweeps, impl=None):
    """Diagonalize a symmetric matrix; a is copied, not modified."""
    a = np.array(a, dtype=np.float64, order="C", copy=True)
    return (impl or _impl).jacobi(a, tol, max_sweeps)
