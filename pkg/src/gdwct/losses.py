"""Training objectives: latent consistency, pixel reconstruction, LSGAN terms,
and the weighted generator/discriminator totals (regularizers included)."""

from dataclasses import dataclass, fields

from .errors import ArgumentError, ShapeError


@dataclass(frozen=True)
class LossWeights:
    lambda_latent: float = 1.0
    lambda_pixel: float = 10.0
    lambda_w: float = 0.001
    lambda_c: float = 10.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ArgumentError(f"{f.name} must be >= 0")


@dataclass
class LossReport:
    """Named scalar values for every loss term of one training step."""

    style: float = 0.0
    content: float = 0.0
    cycle: float = 0.0
    identity_a: float = 0.0
    identity_b: float = 0.0
    adv_g_a: float = 0.0
    adv_g_b: float = 0.0
    adv_d_a: float = 0.0
    adv_d_b: float = 0.0
    r_w: float = 0.0
    r_c: float = 0.0
    total_g: float = 0.0
    total_d: float = 0.0

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _mean_abs_diff(a, b, what):
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shape mismatch {a.shape} vs {b.shape}")
    return (a - b).abs().mean()


def style_consistency(s_translated, s_ref):
    """L1 between the re-encoded style of a translation and the exemplar style."""
    return _mean_abs_diff(s_translated, s_ref, "style_consistency")


def content_consistency(c_translated, c_src):
    """L1 between the re-encoded content of a translation and the source content."""
    return _mean_abs_diff(c_translated, c_src, "content_consistency")


def pixel_l1(a, b):
    """Mean absolute pixel difference; used for cycle and identity terms."""
    return _mean_abs_diff(a, b, "pixel_l1")


def lsgan_d(real_scores, fake_scores):
    """Discriminator objective: reals toward 1, (detached) fakes toward 0.

    Averaged over scales so the weight is scale-count invariant.
    """
    terms = []
    for r in real_scores:
        terms.append((r - 1.0).mul(r - 1.0).mean().scale(0.5))
    for f in fake_scores:
        terms.append((f * f).mean().scale(0.5))
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    n_scales = max(len(real_scores), len(fake_scores), 1)
    return total.scale(1.0 / n_scales)


def lsgan_g(fake_scores):
    """Generator objective: fake scores pushed toward 1; averaged over scales."""
    total = None
    for f in fake_scores:
        t = (f - 1.0).mul(f - 1.0).mean().scale(0.5)
        total = t if total is None else total + t
    return total.scale(1.0 / len(fake_scores))


def total_generator(adv_g_a, adv_g_b, style, content, cycle, identity_a, identity_b,
                    r_w, r_c, weights):
    """Full generator/encoder objective over both directions.

    The whitening and coloring regularizers enter with their own weights;
    they are what makes the learned approximation trainable.
    """
    return (
        adv_g_a + adv_g_b
        + (style + content).scale(weights.lambda_latent)
        + (cycle + identity_a + identity_b).scale(weights.lambda_pixel)
        + r_w.scale(weights.lambda_w)
        + r_c.scale(weights.lambda_c)
    )


def total_discriminator(adv_d_a, adv_d_b):
    return adv_d_a + adv_d_b
