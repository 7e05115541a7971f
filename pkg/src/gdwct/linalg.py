"""Classical whitening-and-coloring machinery (the forward-only oracle).

Works on plain numpy C x N feature matrices and stays deliberately outside
the autodiff tape: the eigendecomposition path exists to verify the learned
transform, not to be trained through.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ArgumentError, ConvergenceError, DegenerateSampleError, ShapeError

EIG_TOL = 1e-10
EIG_MAX_SWEEPS = 50
EIGVAL_CLAMP = 1e-5
COLUMN_NORM_CLAMP = 1e-8


@dataclass
class EigenPair:
    """Orthogonal eigenvectors Q and eigenvalues (descending) of a symmetric matrix."""

    Q: np.ndarray
    lambdas: np.ndarray


@dataclass
class ColoringFactors:
    """U with unit-L2 columns and the nonnegative column norms D, so U @ diag(D) = input."""

    U: np.ndarray
    D: np.ndarray


def covariance(f):
    """Covariance of a C x N feature matrix over its N samples (divisor N-1)."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2:
        raise ShapeError(f"covariance: expected a C x N matrix, got shape {f.shape}")
    n = f.shape[1]
    if n < 2:
        raise DegenerateSampleError(f"covariance needs N >= 2 samples, got N={n}")
    z = f - f.mean(axis=1, keepdims=True)
    return (z @ z.T) / (n - 1)


def eig_symmetric(s, tol=EIG_TOL, max_sweeps=EIG_MAX_SWEEPS, impl=None):
    """Cyclic-Jacobi eigendecomposition of a symmetric matrix.

    Eigenvalues come back sorted descending; each eigenvector column has its
    largest-magnitude entry made positive for reproducibility.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ArgumentError(f"eig_symmetric: expected a square matrix, got {s.shape}")
    if np.abs(s - s.T).max(initial=0.0) >= 1e-9:
        raise ArgumentError("eig_symmetric: input is not symmetric within 1e-9")
    lam, q, sweeps = kernels.jacobi(s, tol, max_sweeps, impl=impl)
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (tol={tol})")
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    q = q[:, order]
    picks = np.abs(q).argmax(axis=0)
    signs = np.sign(q[picks, np.arange(q.shape[1])])
    signs[signs == 0] = 1.0
    return EigenPair(Q=q * signs, lambdas=lam)


def whiten_classical(c):
    """Exact whitening: project out the mean, rescale along covariance eigenvectors.

    Eigenvalues are clamped at EIGVAL_CLAMP before the inverse square root so
    rank-deficient covariances cannot blow up.
    """
    c = np.asarray(c, dtype=np.float64)
    pair = eig_symmetric(covariance(c))
    lam = np.maximum(pair.lambdas, EIGVAL_CLAMP)
    w = pair.Q @ np.diag(lam ** -0.5) @ pair.Q.T
    return w @ (c - c.mean(axis=1, keepdims=True))


def color_classical(c_w, s):
    """Exact coloring: impose the covariance of style feature s on whitened c_w."""
    c_w = np.asarray(c_w, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if c_w.shape[0] != s.shape[0]:
        raise ShapeError(f"color_classical: channel mismatch {c_w.shape[0]} vs {s.shape[0]}")
    pair = eig_symmetric(covariance(s))
    lam = np.maximum(pair.lambdas, 0.0)
    ct = pair.Q @ np.diag(lam ** 0.5) @ pair.Q.T
    return ct @ c_w


def decompose_column_norm(s_ct):
    """Split a matrix into unit-column U and diagonal D of column L2 norms.

    Norms are clamped at COLUMN_NORM_CLAMP so zero columns stay finite.
    """
    s_ct = np.asarray(s_ct, dtype=np.float64)
    if s_ct.ndim != 2:
        raise ShapeError(f"decompose_column_norm: expected a matrix, got {s_ct.shape}")
    d = np.maximum(np.sqrt((s_ct * s_ct).sum(axis=0)), COLUMN_NORM_CLAMP)
    return ColoringFactors(U=s_ct / d, D=d)
