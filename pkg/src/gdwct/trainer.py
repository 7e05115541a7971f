"""Bidirectional training loop: discriminators first, then one optimizer group
for generators, encoders, style heads, and alpha blends. Includes the Adam
update, the step-decay schedule, checkpoint resume, and the finite-difference
gradient-check harness."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import AbortStepError, ArgumentError
from .losses import (LossReport, LossWeights, lsgan_d, lsgan_g, pixel_l1,
                     content_consistency, style_consistency,
                     total_discriminator, total_generator)
from .networks import NetworkConfig, build_domain_model, hop_styles
from .tensor import Tensor
from .transform import (GroupSpec, as_feature_matrix, coloring_regularizer,
                        whitening_regularizer)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 4
    total_iters: int = 2000
    decay_start_iter: int = 1000
    decay_every: int = 500
    decay_rate: float = 0.5
    seed: int = 0
    sample_every: int = 500
    checkpoint_every: int = 500
    weights: LossWeights = field(default_factory=LossWeights)
    net: NetworkConfig = field(default_factory=NetworkConfig)

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ArgumentError("beta1 and beta2 must lie in [0, 1)")
        if self.lr <= 0:
            raise ArgumentError("lr must be positive")
        if not 0 < self.decay_rate <= 1:
            raise ArgumentError("decay_rate must lie in (0, 1]")
        if self.batch_size < 1 or self.total_iters < 0:
            raise ArgumentError("batch_size must be >= 1 and total_iters >= 0")
        if self.decay_every < 1:
            raise ArgumentError("decay_every must be >= 1")

    @classmethod
    def from_flat(cls, values):
        """Build from a flat key=value dict (config-file representation)."""
        values = dict(values)
        weights = LossWeights(**{
            k: values.pop(k) for k in ("lambda_latent", "lambda_pixel", "lambda_w", "lambda_c")
            if k in values
        })
        net = NetworkConfig(**{
            k: values.pop(k)
            for k in ("base_channels", "n_res_blocks", "n_hops", "groups", "image_size", "mlp_depth")
            if k in values
        })
        return cls(weights=weights, net=net, **values)

    def to_flat(self):
        flat = asdict(self)
        flat.update(flat.pop("weights"))
        flat.update(flat.pop("net"))
        return flat


def lr_at(iteration, cfg):
    """Step-decay schedule: lr * rate^k, k growing every decay_every iters."""
    if iteration < cfg.decay_start_iter:
        return cfg.lr
    k = 1 + (iteration - cfg.decay_start_iter) // cfg.decay_every
    return cfg.lr * cfg.decay_rate ** k


class Adam:
    """Adam with bias correction over a named parameter dict."""

    def __init__(self, params, beta1=0.5, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.t = 0

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self, lr_t):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                raise AbortStepError(f"parameter {name!r} has no gradient")
            if not np.all(np.isfinite(g)):
                raise AbortStepError(f"non-finite gradient in parameter {name!r}")
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = self.m[name] / (1 - b1 ** self.t)
            v_hat = self.v[name] / (1 - b2 ** self.t)
            p.data = p.data - lr_t * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_arrays(self, prefix):
        out = {}
        for name in self.params:
            out[f"{prefix}.m.{name}"] = self.m[name]
            out[f"{prefix}.v.{name}"] = self.v[name]
        return out

    def load_state(self, prefix, arrays, t):
        for name in self.params:
            self.m[name] = arrays[f"{prefix}.m.{name}"].copy()
            self.v[name] = arrays[f"{prefix}.v.{name}"].copy()
        self.t = t


def _finite_scalar(t, what):
    val = t.item()
    if not np.isfinite(val):
        raise AbortStepError(f"non-finite {what}: {val}")
    return val


def train_step(model_a, model_b, x_a, x_b, opt_d, opt_g, cfg, iteration):
    """One bidirectional step: discriminator update, then generator/encoder update."""
    lr_t = lr_at(iteration, cfg)
    spec = GroupSpec(cfg.net.base_channels, cfg.net.groups)

    c_a, s_a = model_a.content_encoder(x_a), model_a.style_encoder(x_a)
    c_b, s_b = model_b.content_encoder(x_b), model_b.style_encoder(x_b)
    styles_a, styles_b = hop_styles(s_a, model_a), hop_styles(s_b, model_b)
    x_ab = model_b.generator(c_a, styles_b)
    x_ba = model_a.generator(c_b, styles_a)

    # discriminators see fakes as constants
    opt_d.zero_grad()
    adv_d_a = lsgan_d(model_a.discriminator(x_a), model_a.discriminator(x_ba.detach()))
    adv_d_b = lsgan_d(model_b.discriminator(x_b), model_b.discriminator(x_ab.detach()))
    d_loss = total_discriminator(adv_d_a, adv_d_b)
    _finite_scalar(d_loss, "discriminator loss")
    d_loss.backward()
    opt_d.step(lr_t)

    # identity passes reuse each domain's own style
    x_aa = model_a.generator(c_a, styles_a)
    x_bb = model_b.generator(c_b, styles_b)

    # re-encode translations; cycle uses the exchanged style features
    c_ab, s_ab = model_b.content_encoder(x_ab), model_b.style_encoder(x_ab)
    c_ba, s_ba = model_a.content_encoder(x_ba), model_a.style_encoder(x_ba)
    x_aba = model_a.generator(c_ab, hop_styles(s_ba, model_a))
    x_bab = model_b.generator(c_ba, hop_styles(s_ab, model_b))

    style = style_consistency(s_ab, s_b) + style_consistency(s_ba, s_a)
    content = content_consistency(c_ab, c_a) + content_consistency(c_ba, c_b)
    cycle = pixel_l1(x_aba, x_a) + pixel_l1(x_bab, x_b)
    identity_a = pixel_l1(x_aa, x_a)
    identity_b = pixel_l1(x_bb, x_b)
    adv_g_a = lsgan_g(model_a.discriminator(x_ba))
    adv_g_b = lsgan_g(model_b.discriminator(x_ab))
    r_w = (whitening_regularizer(as_feature_matrix(c_a), spec)
           + whitening_regularizer(as_feature_matrix(c_b), spec)).scale(0.5)
    r_c = coloring_regularizer([st.per_group_U for st in styles_a + styles_b])

    g_loss = total_generator(adv_g_a, adv_g_b, style, content, cycle,
                             identity_a, identity_b, r_w, r_c, cfg.weights)
    _finite_scalar(g_loss, "generator loss")
    opt_g.zero_grad()
    g_loss.backward()
    opt_g.step(lr_t)

    return LossReport(
        style=style.item(), content=content.item(), cycle=cycle.item(),
        identity_a=identity_a.item(), identity_b=identity_b.item(),
        adv_g_a=adv_g_a.item(), adv_g_b=adv_g_b.item(),
        adv_d_a=adv_d_a.item(), adv_d_b=adv_d_b.item(),
        r_w=r_w.item(), r_c=r_c.item(),
        total_g=g_loss.item(), total_d=d_loss.item(),
    )


class Trainer:
    """Owns the two domain models, both optimizers, and the metrics stream."""

    def __init__(self, cfg):
        self.cfg = cfg
        rng = np.random.default_rng([cfg.seed, 0x90D3])
        self.model_a = build_domain_model(cfg.net, rng)
        self.model_b = build_domain_model(cfg.net, rng)
        self.opt_d = Adam(self._disc_params(), cfg.beta1, cfg.beta2, cfg.adam_eps)
        self.opt_g = Adam(self._gen_params(), cfg.beta1, cfg.beta2, cfg.adam_eps)
        self.iteration = 0

    def _disc_params(self):
        return {**self.model_a.discriminator_parameters("a."),
                **self.model_b.discriminator_parameters("b.")}

    def _gen_params(self):
        return {**self.model_a.generator_parameters("a."),
                **self.model_b.generator_parameters("b.")}

    def _all_params(self):
        return {**self.model_a.named_parameters("a."), **self.model_b.named_parameters("b.")}

    def step(self, x_a, x_b):
        report = train_step(self.model_a, self.model_b, x_a, x_b,
                            self.opt_d, self.opt_g, self.cfg, self.iteration)
        self.iteration += 1
        return report

    def metrics_line(self, report):
        rec = {"iter": self.iteration - 1, "lr": lr_at(self.iteration - 1, self.cfg)}
        rec.update(report.to_dict())
        rec["alpha_a"] = [b.alpha.item() for b in self.model_a.generator.alphas]
        rec["alpha_b"] = [b.alpha.item() for b in self.model_b.generator.alphas]
        return json.dumps(rec, sort_keys=True)

    def run(self, batch_fn, metrics_out=None, on_iteration=None):
        """Run from the current iteration to total_iters; returns all reports."""
        reports = []
        while self.iteration < self.cfg.total_iters:
            x_a, x_b = batch_fn(self.iteration)
            report = self.step(x_a, x_b)
            reports.append(report)
            if metrics_out is not None:
                metrics_out.write(self.metrics_line(report) + "\n")
            if on_iteration is not None:
                on_iteration(self, report)
        return reports

    # ------------------------------------------------------------- checkpoints

    def save(self, path):
        meta = {
            "config": self.cfg.to_flat(),
            "iter": self.iteration,
            "opt_d_t": self.opt_d.t,
            "opt_g_t": self.opt_g.t,
        }
        arrays = {k: p.data for k, p in self._all_params().items()}
        arrays.update(self.opt_d.state_arrays("opt_d"))
        arrays.update(self.opt_g.state_arrays("opt_g"))
        save_checkpoint(path, meta, arrays)

    @classmethod
    def load(cls, path):
        from .errors import CheckpointError

        meta, arrays = load_checkpoint(path)
        cfg = TrainConfig.from_flat(meta["config"])
        trainer = cls(cfg)
        for name, p in trainer._all_params().items():
            if name not in arrays:
                raise CheckpointError(f"checkpoint missing parameter {name!r}")
            if arrays[name].shape != p.data.shape:
                raise CheckpointError(
                    f"parameter {name!r}: checkpoint shape {arrays[name].shape} vs model {p.data.shape}")
            p.data = arrays[name].copy()
        trainer.opt_d.load_state("opt_d", arrays, meta["opt_d_t"])
        trainer.opt_g.load_state("opt_g", arrays, meta["opt_g_t"])
        trainer.iteration = meta["iter"]
        return trainer


# ------------------------------------------------------------- gradient checks

FD_STEP = 1e-6
FD_DENOM_FLOOR = 1e-3  # below this the comparison is effectively absolute


def _fd_compare(build, params, h=FD_STEP, max_entries=6, rng=None):
    """Max relative error between analytic and central-difference gradients.

    Checks up to max_entries randomly chosen entries per parameter tensor.
    """
    rng = rng or np.random.default_rng(0)
    for p in params:
        p.zero_grad()
    build().backward()
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        n = flat.size
        idxs = range(n) if n <= max_entries else rng.choice(n, size=max_entries, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            up = build().item()
            flat[i] = orig - h
            down = build().item()
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            a = analytic.reshape(-1)[i]
            denom = max(abs(a), abs(numeric), FD_DENOM_FLOOR)
            worst = max(worst, abs(a - numeric) / denom)
    for p in params:
        p.zero_grad()
    return worst


def _gdwct_checks(rng):
    from .transform import AlphaBlend, build_coloring, deep_whiten, gdwct_forward, normalize_columns

    checks = []

    c = Tensor(rng.uniform(-1, 1, (4, 32)), requires_grad=True)
    spec = GroupSpec(4, 2)
    checks.append(("whitening_regularizer", lambda: whitening_regularizer(c, spec), [c]))

    raw = Tensor(rng.uniform(-1, 1, (2, 3, 3)), requires_grad=True)
    checks.append(("coloring_regularizer", lambda: coloring_regularizer(normalize_columns(raw)[0]), [raw]))

    feat = Tensor(rng.uniform(-1, 1, (1, 4, 3, 3)), requires_grad=True)
    blocks = Tensor(rng.uniform(-1, 1, (1, 2, 2, 2)), requires_grad=True)
    mu = Tensor(rng.uniform(-1, 1, (1, 4)), requires_grad=True)
    blend = AlphaBlend(raw=rng.uniform(-1, 1))

    def forward():
        out = gdwct_forward(feat, build_coloring(blocks, s_mu=mu), blend)
        return (out * out).mean()

    checks.append(("gdwct_forward", forward, [feat, blocks, mu, blend.raw]))

    dw = Tensor(rng.uniform(-1, 1, (3, 8)), requires_grad=True)
    checks.append(("deep_whiten", lambda: deep_whiten(dw).tanh().sum(), [dw]))
    return checks


def _loss_checks(rng):
    sa = Tensor(rng.uniform(-1, 1, (2, 6)), requires_grad=True)
    sb = Tensor(rng.uniform(-1, 1, (2, 6)), requires_grad=True)
    pa = Tensor(rng.uniform(-1, 1, (1, 3, 4, 4)), requires_grad=True)
    pb = Tensor(rng.uniform(-1, 1, (1, 3, 4, 4)), requires_grad=True)
    fake = Tensor(rng.uniform(-1, 1, (1, 1, 2, 2)), requires_grad=True)
    real = Tensor(rng.uniform(-1, 1, (1, 1, 2, 2)), requires_grad=True)
    return [
        ("style_consistency", lambda: style_consistency(sa, sb), [sa, sb]),
        ("pixel_l1", lambda: pixel_l1(pa, pb), [pa, pb]),
        ("lsgan_g", lambda: lsgan_g([fake]), [fake]),
        ("lsgan_d", lambda: lsgan_d([real], [fake]), [real, fake]),
    ]


def _network_checks(rng):
    cfg = NetworkConfig(base_channels=8, n_res_blocks=1, n_hops=1, groups=2,
                        image_size=16, mlp_depth=2)
    model = build_domain_model(cfg, np.random.default_rng(17))
    x = Tensor(rng.uniform(-1, 1, (1, 3, 16, 16)))
    params = list(model.named_parameters().values())

    def forward():
        c = model.content_encoder(x)
        s = model.style_encoder(x)
        y = model.generator(c, hop_styles(s, model))
        scores = model.discriminator(y)
        total = (y * y).mean()  # smooth objective: abs would put FD on a kink
        for m in scores:
            total = total + m.tanh().mean()
        return total

    return [("networks-small", forward, params)]


GRADCHECK_SCOPES = ("gdwct", "losses", "networks-small")


def gradient_check(module_tag, trials=3, tolerance=1e-4, seed=0):
    """Compare analytic gradients to central finite differences.

    Returns {"checks": [(name, max_rel_err)], "max_rel_err": float, "ok": bool};
    failures are reported, never raised.
    """
    if module_tag not in GRADCHECK_SCOPES:
        raise ArgumentError(f"unknown gradcheck scope {module_tag!r} (use one of {GRADCHECK_SCOPES})")
    builders = {"gdwct": _gdwct_checks, "losses": _loss_checks, "networks-small": _network_checks}
    results = {}
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        for name, build, params in builders[module_tag](rng):
            err = _fd_compare(build, params, rng=np.random.default_rng([seed, trial, 1]))
            results[name] = max(results.get(name, 0.0), err)
    worst = max(results.values())
    return {
        "checks": sorted(results.items()),
        "max_rel_err": worst,
        "ok": worst < tolerance,
        "tolerance": tolerance,
    }
