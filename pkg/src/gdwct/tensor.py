"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every array value in the library (activations, parameters, losses) is a
Tensor. Ops record their parents and a backward closure; calling
``backward()`` on a scalar root walks the tape in reverse topological
order and accumulates gradients additively into every ``requires_grad``
ancestor. The tape is rebuilt on every forward pass.

Broadcasting in the binary elementwise ops is deliberately restricted to
scalar-with-tensor; shaped broadcasts must go through ``broadcast_to`` so
each gradient rule stays auditable.
"""

import numpy as np

from . import kernels
from .errors import ArgumentError, GroupDivisibilityError, ShapeError

LEAKY_SLOPE = 0.2


class Tensor:
    """A dense n-dimensional array of 64-bit reals with optional grad."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "_tag")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward_fn = None
        self._tag = "leaf"

    # ------------------------------------------------------------------ basics

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        if self.data.size != 1:
            raise ArgumentError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, tag={self._tag})"

    # --------------------------------------------------------------- op plumbing

    @staticmethod
    def _make(data, parents, backward_fn, tag):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward_fn = backward_fn
        out._tag = tag
        return out

    @staticmethod
    def _coerce(x):
        if isinstance(x, Tensor):
            return x
        if isinstance(x, (int, float, np.floating, np.integer)):
            return Tensor(np.float64(x))
        raise ArgumentError(f"cannot treat {type(x).__name__} as a Tensor operand")

    def _binary(self, other, tag, fwd, bwd):
        """Elementwise binary op; shapes must match or one side be scalar."""
        other = self._coerce(other)
        a, b = self, other
        if a.shape != b.shape and a.size != 1 and b.size != 1:
            raise ShapeError(f"{tag}: shape mismatch {a.shape} vs {b.shape} (only scalar broadcast allowed)")

        def backward(g):
            ga, gb = bwd(g, a.data, b.data)
            if a.size == 1 and ga.shape != a.shape:
                ga = ga.sum().reshape(a.shape)
            if b.size == 1 and gb.shape != b.shape:
                gb = gb.sum().reshape(b.shape)
            return ga, gb

        return Tensor._make(fwd(a.data, b.data), (a, b), backward, tag)

    def _unary(self, tag, fwd, bwd):
        x = self.data
        y = fwd(x)
        return Tensor._make(y, (self,), lambda g: (bwd(g, x, y),), tag)

    # ------------------------------------------------------------- elementwise

    def add(self, other):
        return self._binary(other, "add", lambda a, b: a + b, lambda g, a, b: (g, g))

    def sub(self, other):
        return self._binary(other, "sub", lambda a, b: a - b, lambda g, a, b: (g, -g))

    def mul(self, other):
        return self._binary(other, "mul", lambda a, b: a * b, lambda g, a, b: (g * b, g * a))

    def scale(self, k):
        k = float(k)
        return self._unary("scale", lambda x: x * k, lambda g, x, y: g * k)

    def neg(self):
        return self._unary("neg", lambda x: -x, lambda g, x, y: -g)

    def relu(self):
        return self._unary("relu", lambda x: np.maximum(x, 0.0), lambda g, x, y: g * (x > 0.0))

    def leaky_relu(self):
        return self._unary(
            "leaky_relu",
            lambda x: np.where(x > 0.0, x, LEAKY_SLOPE * x),
            lambda g, x, y: g * np.where(x > 0.0, 1.0, LEAKY_SLOPE),
        )

    def tanh(self):
        return self._unary("tanh", np.tanh, lambda g, x, y: g * (1.0 - y * y))

    def sigmoid(self):
        return self._unary(
            "sigmoid",
            lambda x: 1.0 / (1.0 + np.exp(-x)),
            lambda g, x, y: g * y * (1.0 - y),
        )

    def sqrt(self):
        return self._unary("sqrt", np.sqrt, lambda g, x, y: g / (2.0 * y))

    def recip(self):
        return self._unary("recip", lambda x: 1.0 / x, lambda g, x, y: -g * y * y)

    def abs(self):
        return self._unary("abs", np.abs, lambda g, x, y: g * np.sign(x))

    def clamp_min(self, v):
        v = float(v)
        return self._unary(
            "clamp_min",
            lambda x: np.maximum(x, v),
            lambda g, x, y: g * (x > v),
        )

    # ------------------------------------------------------------------ linear

    def matmul(self, other):
        other = self._coerce(other)
        a, b = self, other
        if a.ndim not in (2, 3) or b.ndim != a.ndim:
            raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
        if a.shape[-1] != b.shape[-2] or (a.ndim == 3 and a.shape[0] != b.shape[0]):
            raise ShapeError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
        swap = (0, 2, 1) if a.ndim == 3 else (1, 0)

        def backward(g):
            return np.matmul(g, b.data.transpose(swap)), np.matmul(a.data.transpose(swap), g)

        return Tensor._make(np.matmul(a.data, b.data), (a, b), backward, "matmul")

    def conv2d(self, weight, stride=1, pad=0):
        """Cross-correlation of [B,C,H,W] with [O,C,k,k], zero padding."""
        weight = self._coerce(weight)
        x, w = self, weight
        if x.ndim != 4 or w.ndim != 4:
            raise ShapeError(f"conv2d: expected 4-d input and kernel, got {x.shape}, {w.shape}")
        bsz, cin, h, wdt = x.shape
        cout, cin_w, k, k2 = w.shape
        if cin != cin_w or k != k2:
            raise ShapeError(f"conv2d: kernel {w.shape} does not match input {x.shape}")
        if k > h + 2 * pad or k > wdt + 2 * pad:
            raise ShapeError(f"conv2d: kernel size {k} exceeds padded input {(h + 2 * pad, wdt + 2 * pad)}")
        ho = (h + 2 * pad - k) // stride + 1
        wo = (wdt + 2 * pad - k) // stride + 1
        cols = kernels.im2col(x.data, k, stride, pad)  # [B, C*k*k, ho*wo]
        w2 = w.data.reshape(cout, cin * k * k)
        y = np.matmul(w2, cols).reshape(bsz, cout, ho, wo)

        def backward(g):
            g2 = g.reshape(bsz, cout, ho * wo)
            gw = np.tensordot(g2, cols, axes=([0, 2], [0, 2])).reshape(w.shape)
            gcols = np.matmul(w2.T, g2)
            gx = kernels.col2im(gcols, cin, h, wdt, k, stride, pad)
            return gx, gw

        return Tensor._make(y, (x, w), backward, "conv2d")

    # ------------------------------------------------------------- rearranging

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        new = np.reshape(self.data, shape)
        old_shape = self.shape
        return Tensor._make(new, (self,), lambda g: (g.reshape(old_shape),), "reshape")

    def transpose(self, axes=None):
        if axes is None:
            if self.ndim != 2:
                raise ArgumentError("transpose() without axes requires a 2-d tensor")
            axes = (1, 0)
        axes = tuple(axes)
        inv = tuple(np.argsort(axes))
        return Tensor._make(self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),), "transpose")

    def broadcast_to(self, shape):
        shape = tuple(shape)
        try:
            out = np.broadcast_to(self.data, shape).copy()
        except ValueError as e:
            raise ShapeError(f"broadcast_to: cannot broadcast {self.shape} to {shape}") from e
        src = self.shape

        def backward(g):
            extra = g.ndim - len(src)
            if extra:
                g = g.sum(axis=tuple(range(extra)))
            keep = tuple(i for i, n in enumerate(src) if n == 1 and g.shape[i] != 1)
            if keep:
                g = g.sum(axis=keep, keepdims=True)
            return (g,)

        return Tensor._make(out, (self,), backward, "broadcast_to")

    # -------------------------------------------------------------- reductions

    def _check_axes(self, axes):
        if axes is None:
            return tuple(range(self.ndim))
        if isinstance(axes, int):
            axes = (axes,)
        axes = tuple(int(a) for a in axes)
        norm = tuple(a + self.ndim if a < 0 else a for a in axes)
        if len(set(norm)) != len(norm):
            raise ArgumentError(f"repeated reduction axis in {axes}")
        for a in norm:
            if not 0 <= a < self.ndim:
                raise ArgumentError(f"axis {a} out of range for shape {self.shape}")
        return norm

    def sum(self, axes=None):
        axes = self._check_axes(axes)
        src = self.shape

        def backward(g):
            g = np.expand_dims(g, axes) if g.ndim else np.asarray(g)
            return (np.broadcast_to(g, src).copy(),)

        return Tensor._make(self.data.sum(axis=axes), (self,), backward, "sum")

    def mean(self, axes=None):
        axes = self._check_axes(axes)
        src = self.shape
        n = 1
        for a in axes:
            n *= src[a]

        def backward(g):
            g = np.expand_dims(g, axes) if g.ndim else np.asarray(g)
            return (np.broadcast_to(g, src).copy() / n,)

        return Tensor._make(self.data.mean(axis=axes), (self,), backward, "mean")

    # ------------------------------------------------------------ block diagonal

    def block_diag(self):
        """Assemble [..., G, d, d] blocks into a [..., G*d, G*d] block-diagonal."""
        if self.ndim not in (3, 4) or self.shape[-1] != self.shape[-2]:
            raise ShapeError(f"block_diag: expected [...,G,d,d], got {self.shape}")
        g_count, d = self.shape[-3], self.shape[-1]
        c = g_count * d
        lead = self.shape[:-3]
        out = np.zeros(lead + (c, c), dtype=np.float64)
        for i in range(g_count):
            out[..., i * d:(i + 1) * d, i * d:(i + 1) * d] = self.data[..., i, :, :]

        def backward(grad):
            gb = np.empty(lead + (g_count, d, d), dtype=np.float64)
            for i in range(g_count):
                gb[..., i, :, :] = grad[..., i * d:(i + 1) * d, i * d:(i + 1) * d]
            return (gb,)

        return Tensor._make(out, (self,), backward, "block_diag")

    # ---------------------------------------------------------------- backward

    def backward(self):
        if self.size != 1:
            raise ArgumentError(f"backward() root must be a scalar, got shape {self.shape}")
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward_fn is None:
                continue
            for p, pg in zip(node._parents, node._backward_fn(g)):
                if not p.requires_grad:
                    continue
                pg = np.asarray(pg, dtype=np.float64).reshape(p.shape)
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg

    # ---------------------------------------------------------------- operators

    __add__ = add
    __mul__ = mul
    __sub__ = sub
    __matmul__ = matmul
    __neg__ = neg

    def __radd__(self, other):
        return self._coerce(other).add(self)

    def __rsub__(self, other):
        return self._coerce(other).sub(self)

    def __rmul__(self, other):
        return self._coerce(other).mul(self)


def stack(tensors, axis=0):
    """Stack same-shaped tensors along a new axis."""
    tensors = [Tensor._coerce(t) for t in tensors]
    if not tensors:
        raise ArgumentError("stack needs at least one tensor")
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise ShapeError(f"stack: shape mismatch {shape} vs {t.shape}")
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor._make(data, tuple(tensors), backward, "stack")


# ----------------------------------------------------------------- contract API


def elementwise(op_tag, a, b=None):
    """Dispatch the fixed elementwise vocabulary by tag."""
    a = Tensor._coerce(a)
    if op_tag in ("add", "sub", "mul"):
        if b is None:
            raise ArgumentError(f"{op_tag} needs two operands")
        return getattr(a, op_tag)(b)
    if op_tag == "scale":
        if b is None:
            raise ArgumentError("scale needs a scalar factor")
        return a.scale(b if not isinstance(b, Tensor) else b.item())
    if op_tag in ("relu", "leaky_relu", "tanh"):
        return getattr(a, op_tag)()
    raise ArgumentError(f"unknown elementwise op {op_tag!r}")


def reduce(op_tag, x, axes=None):
    x = Tensor._coerce(x)
    if op_tag == "mean":
        return x.mean(axes)
    if op_tag == "sum":
        return x.sum(axes)
    raise ArgumentError(f"unknown reduction {op_tag!r}")


def group_split(x, groups):
    """Split the leading channel axis into [G, C/G, ...]."""
    x = Tensor._coerce(x)
    c = x.shape[0]
    if groups < 1 or c % groups != 0:
        raise GroupDivisibilityError(f"channels {c} not divisible into {groups} groups")
    return x.reshape((groups, c // groups) + x.shape[1:])


def group_merge(x):
    x = Tensor._coerce(x)
    if x.ndim < 2:
        raise ShapeError(f"group_merge: need at least 2 axes, got {x.shape}")
    return x.reshape((x.shape[0] * x.shape[1],) + x.shape[2:])


def flatten_spatial(x):
    """Collapse the trailing two (spatial) axes: [..., C, H, W] -> [..., C, H*W]."""
    x = Tensor._coerce(x)
    if x.ndim < 3:
        raise ShapeError(f"flatten_spatial: need at least 3 axes, got {x.shape}")
    return x.reshape(x.shape[:-2] + (x.shape[-2] * x.shape[-1],))
