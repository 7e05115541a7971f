"""Wall-time benchmarks: classical eigendecomposition WCT vs the block-diagonal
learned transform, and compiled vs pure-python kernel backends."""

import time

import numpy as np

from . import kernels, linalg
from .errors import ArgumentError

BENCH_SAMPLES = 512  # N = H*W stand-in for the timed feature matrices


def _classical_once(c, s):
    cw = linalg.whiten_classical(c)
    return linalg.color_classical(cw, s)


def _gdwct_once(c, blocks, mu):
    g, gd, _ = blocks.shape
    n = c.shape[1]
    cw = c - c.mean(axis=1, keepdims=True)
    out = np.matmul(blocks, cw.reshape(g, gd, n))  # block-diagonal X applied per group
    return out.reshape(g * gd, n) + mu[:, None]


def benchmark_transform(channels_list, groups_list, trials, seed=0):
    """Time classical WCT against the group-wise transform per (C, G) config.

    Returns rows with mean seconds per call; ordering_ok asserts that the
    learned transform is faster whenever C >= 64.
    """
    if trials < 10:
        raise ArgumentError(f"benchmark needs trials >= 10, got {trials}")
    rng = np.random.default_rng(seed)
    rows = []
    for c_ch in channels_list:
        for g in groups_list:
            if c_ch % g != 0:
                continue
            gd = c_ch // g
            content = rng.normal(size=(c_ch, BENCH_SAMPLES))
            style = rng.normal(size=(c_ch, BENCH_SAMPLES))
            blocks = rng.normal(size=(g, gd, gd))
            mu = rng.normal(size=c_ch)

            t0 = time.perf_counter()
            for _ in range(trials):
                _classical_once(content, style)
            classical = (time.perf_counter() - t0) / trials

            t0 = time.perf_counter()
            for _ in range(trials):
                _gdwct_once(content, blocks, mu)
            gdwct = (time.perf_counter() - t0) / trials

            rows.append({
                "channels": c_ch,
                "groups": g,
                "classical_s": classical,
                "gdwct_s": gdwct,
                "speedup": classical / gdwct if gdwct > 0 else float("inf"),
                "ordering_ok": (gdwct < classical) if c_ch >= 64 else True,
            })
    return rows


def benchmark_kernels(trials=20, seed=0):
    """Compare the compiled and pure-python backends on the two hot kernels."""
    if kernels.BACKEND != "compiled":
        raise ArgumentError("compiled kernel backend unavailable; nothing to compare")
    rng = np.random.default_rng(seed)
    rows = []

    x = rng.normal(size=(2, 16, 32, 32))
    for name, fn in (
        ("im2col 3x3", lambda impl: kernels.im2col(x, 3, 1, 1, impl=impl)),
        ("col2im 3x3", None),
    ):
        if fn is None:
            cols = kernels.im2col(x, 3, 1, 1)
            fn = lambda impl: kernels.col2im(cols, 16, 32, 32, 3, 1, 1, impl=impl)  # noqa: E731
        times = {}
        for backend in ("compiled", "python"):
            impl = kernels.backend_for(backend)
            t0 = time.perf_counter()
            for _ in range(trials):
                fn(impl)
            times[backend] = (time.perf_counter() - t0) / trials
        rows.append({"kernel": name, **{f"{b}_s": t for b, t in times.items()}})

    s = rng.normal(size=(64, 64))
    s = s @ s.T
    times = {}
    for backend in ("compiled", "python"):
        impl = kernels.backend_for(backend)
        t0 = time.perf_counter()
        for _ in range(max(3, trials // 4)):
            kernels.jacobi(s, 1e-10, 50, impl=impl)
        times[backend] = (time.perf_counter() - t0) / max(3, trials // 4)
    rows.append({"kernel": "jacobi 64x64", **{f"{b}_s": t for b, t in times.items()}})
    return rows
