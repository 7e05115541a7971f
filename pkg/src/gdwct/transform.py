"""The learned group-wise whitening-and-coloring transform.

Deep whitening is plain mean subtraction; a regularizer pushes the encoder
toward emitting group-whitened features. Deep coloring builds per-group
U diag(D) U^T matrices from learned square matrices (U from column L2
normalization), assembles them into a block-diagonal X, and applies
X @ phi(c_w) + s_mu, blended with the input through a learnable alpha.
Everything here lives on the autodiff tape.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateSampleError, GroupDivisibilityError, ShapeError
from .tensor import Tensor, stack

COLUMN_NORM_CLAMP = 1e-8


@dataclass(frozen=True)
class GroupSpec:
    """Channel count C split into G contiguous groups of C/G channels."""

    C: int
    G: int

    def __post_init__(self):
        if self.G < 1:
            raise GroupDivisibilityError(f"group count must be >= 1, got {self.G}")
        if self.C % self.G != 0:
            raise GroupDivisibilityError(f"channels {self.C} not divisible by {self.G} groups")

    @property
    def group_dim(self):
        return self.C // self.G


@dataclass
class StyleSummary:
    """Per-domain style products: per-group coloring blocks, their block-diagonal
    assembly X, the style mean vector, and the U factors kept for regularization."""

    per_group_ct: Tensor
    X: Tensor
    s_mu: Optional[Tensor]
    per_group_U: Tensor


class AlphaBlend:
    """Learnable content/style blend; alpha = sigmoid(raw) stays in (0, 1)."""

    def __init__(self, raw=0.0):
        self.raw = Tensor(float(raw), requires_grad=True)

    @property
    def alpha(self):
        return self.raw.sigmoid()


def _mean_last(x):
    m = x.mean(axes=(x.ndim - 1,))
    return m.reshape(m.shape + (1,)).broadcast_to(x.shape)


def deep_whiten(c):
    """Subtract the per-channel mean over the trailing (sample) axis."""
    return c - _mean_last(c)


def whitening_regularizer(c, spec):
    """Mean over groups of the entrywise |group covariance - I| sum.

    c is a C x N feature matrix (N = B*H*W); each group's covariance uses
    the zero-meaned group slice with divisor N-1.
    """
    if c.ndim != 2:
        raise ShapeError(f"whitening_regularizer: expected C x N, got {c.shape}")
    ch, n = c.shape
    if ch != spec.C:
        raise ShapeError(f"whitening_regularizer: feature has {ch} channels, spec says {spec.C}")
    if n < 2:
        raise DegenerateSampleError(f"whitening_regularizer needs N >= 2 samples, got {n}")
    gd = spec.group_dim
    grouped = c.reshape(spec.G, gd, n)
    z = grouped - _mean_last(grouped)
    cov = z.matmul(z.transpose((0, 2, 1))).scale(1.0 / (n - 1))
    eye = Tensor(np.broadcast_to(np.eye(gd), (spec.G, gd, gd)).copy())
    return (cov - eye).abs().sum(axes=(1, 2)).mean()


def coloring_regularizer(per_group_u):
    """Mean over matrices of the entrywise |U^T U - I| sum.

    Accepts a list of square matrices or a tensor [..., n, n]; leading axes
    (batch, group) are averaged jointly.
    """
    if isinstance(per_group_u, (list, tuple)):
        per_group_u = stack(per_group_u, axis=0)
    u = per_group_u
    if u.ndim < 2 or u.shape[-1] != u.shape[-2]:
        raise ShapeError(f"coloring_regularizer: expected [..., n, n], got {u.shape}")
    n = u.shape[-1]
    lead = u.shape[:-2]
    count = int(np.prod(lead)) if lead else 1
    flat = u.reshape((count, n, n))
    gram = flat.transpose((0, 2, 1)).matmul(flat)
    eye = Tensor(np.broadcast_to(np.eye(n), (count, n, n)).copy())
    return (gram - eye).abs().sum(axes=(1, 2)).mean()


def normalize_columns(s_ct):
    """Differentiable column-L2 factorization: s_ct = U diag(D), norms clamped.

    s_ct is [..., n, n]; returns (U [..., n, n], D [..., n]).
    """
    sq = (s_ct * s_ct).sum(axes=(s_ct.ndim - 2,))
    d = sq.clamp_min(COLUMN_NORM_CLAMP ** 2).sqrt()
    shape = s_ct.shape[:-2] + (1, s_ct.shape[-1])
    inv = d.reshape(shape).broadcast_to(s_ct.shape).recip()
    return s_ct * inv, d


def build_coloring(s_ct_groups, s_mu=None):
    """Form per-group U diag(D) U^T blocks and their block-diagonal assembly X.

    Accepts a list of G square matrices, a [G, d, d] tensor, or a batched
    [B, G, d, d] tensor; all steps stay on the tape.
    """
    if isinstance(s_ct_groups, (list, tuple)):
        shapes = {t.shape for t in s_ct_groups}
        if len(shapes) != 1:
            raise ShapeError(f"build_coloring: group matrices disagree in shape: {sorted(shapes)}")
        s_ct_groups = stack(s_ct_groups, axis=0)
    if s_ct_groups.ndim not in (3, 4) or s_ct_groups.shape[-1] != s_ct_groups.shape[-2]:
        raise ShapeError(f"build_coloring: expected [..., G, d, d], got {s_ct_groups.shape}")
    u, d = normalize_columns(s_ct_groups)
    d_rows = d.reshape(d.shape[:-1] + (1, d.shape[-1])).broadcast_to(u.shape)
    ud = u * d_rows
    swap = (0, 2, 1) if u.ndim == 3 else (0, 1, 3, 2)
    if u.ndim == 4:
        b, g, gd, _ = u.shape
        ct = ud.reshape((b * g, gd, gd)).matmul(u.transpose(swap).reshape((b * g, gd, gd))).reshape(u.shape)
    else:
        ct = ud.matmul(u.transpose(swap))
    return StyleSummary(per_group_ct=ct, X=ct.block_diag(), s_mu=s_mu, per_group_U=u)


def gdwct_forward(c, style, blend):
    """Apply the group-wise transform with learnable blending.

    out = alpha * (X @ phi(c - c_mu) + s_mu) + (1 - alpha) * c, with c in
    [C, H, W] or [B, C, H, W] and phi flattening the spatial axes.
    """
    if c.ndim not in (3, 4):
        raise ShapeError(f"gdwct_forward: expected [B,C,H,W] or [C,H,W], got {c.shape}")
    ch = c.shape[-3]
    x = style.X
    if x.shape[-1] != ch:
        raise ShapeError(f"gdwct_forward: X is {x.shape} but content has {ch} channels")
    flat = c.reshape(c.shape[:-2] + (c.shape[-2] * c.shape[-1],))
    cw = deep_whiten(flat)
    if c.ndim == 4:
        b = c.shape[0]
        if x.ndim == 2:
            x = x.reshape((1,) + x.shape).broadcast_to((b,) + x.shape)
        elif x.shape[0] != b:
            raise ShapeError(f"gdwct_forward: batch mismatch X {x.shape} vs content {c.shape}")
    ccw = x.matmul(cw)
    if style.s_mu is not None:
        mu = style.s_mu
        if mu.shape[-1] != ch:
            raise ShapeError(f"gdwct_forward: s_mu has {mu.shape[-1]} channels, content has {ch}")
        ccw = ccw + mu.reshape(mu.shape + (1,)).broadcast_to(ccw.shape)
    alpha = blend.alpha
    out_flat = ccw * alpha + flat * (alpha.neg() + 1.0)
    return out_flat.reshape(c.shape)


def as_feature_matrix(t):
    """View an activation [B, C, H, W] (or [C, H, W]) as C x (B*H*W)."""
    if t.ndim == 3:
        return t.reshape((t.shape[0], t.shape[1] * t.shape[2]))
    if t.ndim == 4:
        b, ch, h, w = t.shape
        return t.transpose((1, 0, 2, 3)).reshape((ch, b * h * w))
    raise ShapeError(f"as_feature_matrix: expected 3- or 4-d activation, got {t.shape}")
