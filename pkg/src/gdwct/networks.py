"""Desk-scale encoders, style MLP heads, multi-hop generator, and discriminators.

The full-scale architecture (256 channels, high-resolution inputs) is kept
structurally intact but parameterized down to 16 channels and 32 px by
NetworkConfig.
Convs feeding a normalization layer are bias-free; normalizations carry no
learned affine so a zero input stays zero through the style encoder.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ShapeError
from .tensor import Tensor
from .transform import AlphaBlend, GroupSpec, build_coloring, gdwct_forward

NORM_EPS = 1e-5


@dataclass(frozen=True)
class NetworkConfig:
    base_channels: int = 16
    n_res_blocks: int = 4
    n_hops: int = 4
    groups: int = 4
    image_size: int = 32
    mlp_depth: int = 3

    def __post_init__(self):
        GroupSpec(self.base_channels, self.groups)  # validates divisibility
        if self.n_hops > self.n_res_blocks:
            raise ArgumentError(f"n_hops={self.n_hops} exceeds n_res_blocks={self.n_res_blocks}")
        if self.image_size % 16 != 0:
            raise ArgumentError(f"image_size must be divisible by 16, got {self.image_size}")
        if self.mlp_depth < 1:
            raise ArgumentError("mlp_depth must be >= 1")

    @property
    def group_dim(self):
        return self.base_channels // self.groups


def style_representation_size(channels, groups):
    """Entries produced per hop by the coloring heads: G * (C/G)^2 = C^2 / G."""
    return groups * (channels // groups) ** 2


class Module:
    """Minimal parameter registry; children are found by attribute walk."""

    def named_parameters(self, prefix=""):
        out = {}
        for key, val in vars(self).items():
            items = enumerate(val) if isinstance(val, (list, tuple)) else [(None, val)]
            for idx, item in items:
                name = f"{prefix}{key}" if idx is None else f"{prefix}{key}.{idx}"
                if isinstance(item, Tensor) and item.requires_grad:
                    out[name] = item
                elif isinstance(item, Module):
                    out.update(item.named_parameters(name + "."))
                elif isinstance(item, AlphaBlend):
                    out[name + ".raw"] = item.raw
        return out


# ---------------------------------------------------------------------- layers


class Conv2d(Module):
    def __init__(self, cin, cout, k, stride=1, pad=0, bias=False, *, rng):
        a = math.sqrt(1.0 / (cin * k * k))
        self.weight = Tensor(rng.uniform(-a, a, (cout, cin, k, k)), requires_grad=True)
        self.bias = Tensor(rng.uniform(-a, a, cout), requires_grad=True) if bias else None
        self.stride, self.pad = stride, pad

    def __call__(self, x):
        y = x.conv2d(self.weight, stride=self.stride, pad=self.pad)
        if self.bias is not None:
            y = y + self.bias.reshape((1, self.bias.shape[0], 1, 1)).broadcast_to(y.shape)
        return y


class Linear(Module):
    def __init__(self, din, dout, bias=True, *, rng):
        a = math.sqrt(1.0 / din)
        self.weight = Tensor(rng.uniform(-a, a, (din, dout)), requires_grad=True)
        self.bias = Tensor(rng.uniform(-a, a, dout), requires_grad=True) if bias else None

    def __call__(self, x):
        y = x.matmul(self.weight)
        if self.bias is not None:
            y = y + self.bias.reshape((1, self.bias.shape[0])).broadcast_to(y.shape)
        return y


def instance_norm(x, eps=NORM_EPS):
    """Normalize each (sample, channel) plane over its spatial extent."""
    b, c, h, w = x.shape
    flat = x.reshape((b, c, h * w))
    m = flat.mean(axes=(2,))
    z = flat - m.reshape((b, c, 1)).broadcast_to(flat.shape)
    v = (z * z).mean(axes=(2,))
    inv = (v + eps).sqrt().recip()
    return (z * inv.reshape((b, c, 1)).broadcast_to(flat.shape)).reshape(x.shape)


def group_norm(x, groups, eps=NORM_EPS):
    """Normalize each (sample, group) slab over channels-in-group and space."""
    b, c, h, w = x.shape
    if c % groups != 0:
        raise ShapeError(f"group_norm: {c} channels not divisible by {groups} groups")
    gd = c // groups
    flat = x.reshape((b, groups, gd * h * w))
    m = flat.mean(axes=(2,))
    z = flat - m.reshape((b, groups, 1)).broadcast_to(flat.shape)
    v = (z * z).mean(axes=(2,))
    inv = (v + eps).sqrt().recip()
    return (z * inv.reshape((b, groups, 1)).broadcast_to(flat.shape)).reshape(x.shape)


def avg_pool2x(x):
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2x: odd spatial size {x.shape}")
    return x.reshape((b, c, h // 2, 2, w // 2, 2)).mean(axes=(3, 5))


def upsample2x(x):
    b, c, h, w = x.shape
    return (
        x.reshape((b, c, h, 1, w, 1))
        .broadcast_to((b, c, h, 2, w, 2))
        .reshape((b, c, 2 * h, 2 * w))
    )


# -------------------------------------------------------------------- networks


class ContentEncoder(Module):
    """7x7 stem, two stride-2 convs, then residual blocks; instance norm throughout."""

    def __init__(self, cfg, rng):
        c = cfg.base_channels
        self.stem = Conv2d(3, c // 4, 7, 1, 3, rng=rng)
        self.down1 = Conv2d(c // 4, c // 2, 4, 2, 1, rng=rng)
        self.down2 = Conv2d(c // 2, c, 4, 2, 1, rng=rng)
        self.res = [
            (Conv2d(c, c, 3, 1, 1, rng=rng), Conv2d(c, c, 3, 1, 1, rng=rng))
            for _ in range(cfg.n_res_blocks)
        ]

    def named_parameters(self, prefix=""):
        out = {}
        out.update(self.stem.named_parameters(prefix + "stem."))
        out.update(self.down1.named_parameters(prefix + "down1."))
        out.update(self.down2.named_parameters(prefix + "down2."))
        for i, (c1, c2) in enumerate(self.res):
            out.update(c1.named_parameters(f"{prefix}res.{i}.0."))
            out.update(c2.named_parameters(f"{prefix}res.{i}.1."))
        return out

    def __call__(self, x):
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"content encoder expects [B,3,S,S], got {x.shape}")
        if x.shape[2] % 4 or x.shape[3] % 4:
            raise ShapeError(f"content encoder needs spatial size divisible by 4, got {x.shape}")
        h = instance_norm(self.stem(x)).relu()
        h = instance_norm(self.down1(h)).relu()
        h = instance_norm(self.down2(h)).relu()
        for c1, c2 in self.res:
            t = instance_norm(c1(h)).relu()
            t = instance_norm(c2(t))
            h = h + t
        return h


class StyleEncoder(Module):
    """Four stride-2 convs with group normalization, then global average pooling."""

    def __init__(self, cfg, rng):
        c = cfg.base_channels
        self.convs = [Conv2d(3 if i == 0 else c, c, 4, 2, 1, rng=rng) for i in range(4)]
        self.groups = cfg.groups

    def __call__(self, x):
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"style encoder expects [B,3,S,S], got {x.shape}")
        if x.shape[2] % 16 or x.shape[3] % 16:
            raise ShapeError(f"style encoder needs spatial size divisible by 16, got {x.shape}")
        h = x
        for conv in self.convs:
            h = group_norm(conv(h), self.groups).relu()
        b, c, hh, ww = h.shape
        return h.reshape((b, c, hh * ww)).mean(axes=(2,))


class Mlp(Module):
    def __init__(self, din, hidden, dout, depth, rng):
        dims = [din] + [hidden] * (depth - 1) + [dout]
        self.layers = [Linear(dims[i], dims[i + 1], rng=rng) for i in range(depth)]

    def __call__(self, x):
        for layer in self.layers[:-1]:
            x = layer(x).relu()
        return self.layers[-1](x)


class HopHeads(Module):
    """Per-hop style heads: shared-across-groups coloring MLP and the mean MLP."""

    def __init__(self, cfg, rng):
        gd, c = cfg.group_dim, cfg.base_channels
        self.mlp_ct = Mlp(gd, c, gd * gd, cfg.mlp_depth, rng)
        self.mlp_mu = Mlp(c, c, c, cfg.mlp_depth, rng)
        self.groups, self.group_dim = cfg.groups, gd

    def __call__(self, s):
        b, c = s.shape
        g, gd = self.groups, self.group_dim
        slices = s.reshape((b * g, gd))
        ct = self.mlp_ct(slices).reshape((b, g, gd, gd))
        mu = self.mlp_mu(s)
        return ct, mu


class Generator(Module):
    """Residual blocks with one GDWCT injection each, then two upsampling stages."""

    def __init__(self, cfg, rng):
        c = cfg.base_channels
        self.res = [
            (Conv2d(c, c, 3, 1, 1, rng=rng), Conv2d(c, c, 3, 1, 1, rng=rng))
            for _ in range(cfg.n_res_blocks)
        ]
        self.up1 = Conv2d(c, c // 2, 3, 1, 1, bias=True, rng=rng)
        self.up2 = Conv2d(c // 2, c // 4, 3, 1, 1, bias=True, rng=rng)
        self.head = Conv2d(c // 4, 3, 7, 1, 3, bias=True, rng=rng)
        self.alphas = [AlphaBlend() for _ in range(cfg.n_hops)]
        self.n_hops = cfg.n_hops

    def named_parameters(self, prefix=""):
        out = {}
        for i, (c1, c2) in enumerate(self.res):
            out.update(c1.named_parameters(f"{prefix}res.{i}.0."))
            out.update(c2.named_parameters(f"{prefix}res.{i}.1."))
        out.update(self.up1.named_parameters(prefix + "up1."))
        out.update(self.up2.named_parameters(prefix + "up2."))
        out.update(self.head.named_parameters(prefix + "head."))
        for i, blend in enumerate(self.alphas):
            out[f"{prefix}alphas.{i}.raw"] = blend.raw
        return out

    def __call__(self, c, styles):
        if len(styles) != self.n_hops:
            raise ArgumentError(f"generator needs {self.n_hops} hop styles, got {len(styles)}")
        h = c
        for i, (c1, c2) in enumerate(self.res):
            t = c1(h).relu()
            t = c2(t)
            if i < self.n_hops:
                t = gdwct_forward(t, styles[i], self.alphas[i])
            h = h + t
        h = self.up1(upsample2x(h)).relu()
        h = self.up2(upsample2x(h)).relu()
        return self.head(h).tanh()


class Discriminator(Module):
    """Two-scale LSGAN patch discriminator; scores are unbounded reals."""

    def __init__(self, cfg, rng):
        c = cfg.base_channels
        self.scales = [
            [
                Conv2d(3, c // 2, 4, 2, 1, bias=True, rng=rng),
                Conv2d(c // 2, c, 4, 2, 1, bias=True, rng=rng),
                Conv2d(c, 2 * c, 4, 2, 1, bias=True, rng=rng),
                Conv2d(2 * c, 1, 3, 1, 1, bias=True, rng=rng),
            ]
            for _ in range(2)
        ]

    def named_parameters(self, prefix=""):
        out = {}
        for i, stack_ in enumerate(self.scales):
            for j, conv in enumerate(stack_):
                out.update(conv.named_parameters(f"{prefix}scales.{i}.{j}."))
        return out

    def __call__(self, x):
        maps = []
        inp = x
        for stack_ in self.scales:
            h = inp
            for conv in stack_[:-1]:
                h = conv(h).leaky_relu()
            maps.append(stack_[-1](h))
            inp = avg_pool2x(inp)
        return maps


class DomainModel(Module):
    """All networks for one domain plus its per-hop style heads."""

    def __init__(self, cfg, rng):
        self.cfg = cfg
        self.content_encoder = ContentEncoder(cfg, rng)
        self.style_encoder = StyleEncoder(cfg, rng)
        self.heads = [HopHeads(cfg, rng) for _ in range(cfg.n_hops)]
        self.generator = Generator(cfg, rng)
        self.discriminator = Discriminator(cfg, rng)

    def named_parameters(self, prefix=""):
        out = {}
        out.update(self.content_encoder.named_parameters(prefix + "content_encoder."))
        out.update(self.style_encoder.named_parameters(prefix + "style_encoder."))
        for i, h in enumerate(self.heads):
            out.update(h.named_parameters(f"{prefix}heads.{i}."))
        out.update(self.generator.named_parameters(prefix + "generator."))
        out.update(self.discriminator.named_parameters(prefix + "discriminator."))
        return out

    def generator_parameters(self, prefix=""):
        params = self.named_parameters(prefix)
        return {k: v for k, v in params.items() if ".discriminator." not in "." + k}

    def discriminator_parameters(self, prefix=""):
        return self.discriminator.named_parameters(prefix + "discriminator.")


def build_domain_model(cfg, rng):
    return DomainModel(cfg, rng)


# --------------------------------------------------------------- op-level API


def content_encode(x, model):
    return model.content_encoder(x)


def style_encode(x, model):
    return model.style_encoder(x)


def style_heads(s, hop, model):
    if not 0 <= hop < len(model.heads):
        raise ArgumentError(f"hop {hop} out of range (n_hops={len(model.heads)})")
    return model.heads[hop](s)


def hop_styles(s, model):
    """Run every hop head on a style vector and build the coloring summaries."""
    styles = []
    for head in model.heads:
        ct_groups, mu = head(s)
        styles.append(build_coloring(ct_groups, s_mu=mu))
    return styles


def generate(c, styles, model):
    return model.generator(c, styles)


def discriminate(x, model):
    return model.discriminator(x)


def translate(x_content, x_style, src_model, dst_model):
    """Full exemplar translation: content from the source domain, style from the target."""
    c = src_model.content_encoder(x_content)
    s = dst_model.style_encoder(x_style)
    return dst_model.generator(c, hop_styles(s, dst_model))
