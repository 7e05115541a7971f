"""Command-line entry point: train / translate / whiten / benchmark /
gradcheck / synth-data.

Exit codes: 0 success, 1 check failure, 2 usage or config error, 3 runtime abort.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench, data_io, networks
from .errors import (AbortStepError, ArgumentError, CheckpointError,
                     ConfigError, FormatError)
from .tensor import Tensor
from .trainer import GRADCHECK_SCOPES, Trainer, TrainConfig, gradient_check
from .transform import StyleSummary


def _identity_styles(model, batch):
    """StyleSummaries that make GDWCT a pure whitening pass: X=I, s_mu=0."""
    cfg = model.cfg
    g, gd, c = cfg.groups, cfg.group_dim, cfg.base_channels
    eye = Tensor(np.broadcast_to(np.eye(gd), (batch, g, gd, gd)).copy())
    zero_mu = Tensor(np.zeros((batch, c)))
    return [
        StyleSummary(per_group_ct=eye, X=eye.block_diag(), s_mu=zero_mu, per_group_U=eye)
        for _ in range(cfg.n_hops)
    ]


def _forced_alpha(generator, raw_value):
    """Context values for forcing every hop blend; returns the originals."""
    originals = [b.raw.data.copy() for b in generator.alphas]
    for b in generator.alphas:
        b.raw.data = np.asarray(float(raw_value))
    return originals


def _restore_alpha(generator, originals):
    for b, orig in zip(generator.alphas, originals):
        b.raw.data = orig


def _sample_grid(trainer, dataset, n_content=4, n_style=2):
    """Tile content | translations for both directions into one image array."""
    size = trainer.cfg.net.image_size
    halves = []
    for src, dst, model_src, model_dst in (
        (dataset.domain_a, dataset.domain_b, trainer.model_a, trainer.model_b),
        (dataset.domain_b, dataset.domain_a, trainer.model_b, trainer.model_a),
    ):
        contents = [s.pixels.data for s in src[:n_content]]
        styles = [s.pixels.data for s in dst[:n_style]]
        rows = []
        for content in contents:
            tiles = [content]
            for style in styles:
                out = networks.translate(
                    Tensor(content[None]), Tensor(style[None]), model_src, model_dst)
                tiles.append(out.data[0])
            rows.append(np.concatenate(tiles, axis=2))
        halves.append(np.concatenate(rows, axis=1))
    width = max(h.shape[2] for h in halves)
    padded = [np.pad(h, ((0, 0), (0, 0), (0, width - h.shape[2])), constant_values=-1.0)
              for h in halves]
    return np.concatenate(padded, axis=1)


def cmd_train(args):
    if args.config:
        cfg = data_io.load_config(args.config)
    else:
        cfg = TrainConfig()
    if args.seed is not None:
        cfg = TrainConfig.from_flat({**cfg.to_flat(), "seed": args.seed})
    if args.iters is not None:
        cfg = TrainConfig.from_flat({**cfg.to_flat(), "total_iters": args.iters})

    if args.synthetic:
        dataset = data_io.synth_dataset(cfg.seed, n_per_domain=16, size=cfg.net.image_size)
    elif args.data:
        dataset = data_io.load_dataset(args.data, cfg.net.image_size)
        dataset.shuffle_seed = cfg.seed
    else:
        print("train: need --data ROOT or --synthetic", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trainer = Trainer(cfg)
    batch_fn = data_io.batch_provider(dataset, cfg.batch_size)

    def on_iteration(tr, report):
        it = tr.iteration
        if cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
            tr.save(out_dir / f"checkpoint_{it:06d}.ckpt")
        if cfg.sample_every and it % cfg.sample_every == 0:
            data_io.save_image(_sample_grid(tr, dataset), out_dir / f"samples_{it:06d}.png")

    metrics_path = out_dir / "metrics.ndjson"
    try:
        with open(metrics_path, "w") as metrics:
            trainer.run(batch_fn, metrics_out=metrics, on_iteration=on_iteration)
    except AbortStepError as e:
        print(f"train: aborted ({e}); last checkpoint retained", file=sys.stderr)
        return 3
    trainer.save(out_dir / "checkpoint_final.ckpt")
    print(f"trained {trainer.iteration} iterations; outputs in {out_dir}")
    return 0


def _load_for_inference(checkpoint):
    trainer = Trainer.load(checkpoint)
    return trainer


def _pick_models(trainer, direction):
    if direction == "a2b":
        return trainer.model_a, trainer.model_b
    if direction == "b2a":
        return trainer.model_b, trainer.model_a
    raise ArgumentError(f"direction must be a2b or b2a, got {direction!r}")


def cmd_translate(args):
    trainer = _load_for_inference(args.checkpoint)
    src, dst = _pick_models(trainer, args.direction)
    size = trainer.cfg.net.image_size
    content = data_io.load_image(args.content, size).pixels
    style = data_io.load_image(args.style, size).pixels
    out = networks.translate(
        Tensor(content.data[None]), Tensor(style.data[None]), src, dst)
    data_io.save_image(out.data[0], args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_whiten(args):
    trainer = _load_for_inference(args.checkpoint)
    src, dst = _pick_models(trainer, args.direction)
    size = trainer.cfg.net.image_size
    content = data_io.load_image(args.content, size).pixels
    c = src.content_encoder(Tensor(content.data[None]))
    originals = _forced_alpha(dst.generator, 30.0)  # sigmoid(30) ~ 1
    try:
        out = dst.generator(c, _identity_styles(dst, batch=1))
    finally:
        _restore_alpha(dst.generator, originals)
    data_io.save_image(out.data[0], args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_benchmark(args):
    channels = [int(x) for x in args.channels.split(",")]
    groups = [int(x) for x in args.groups.split(",")]
    rows = bench.benchmark_transform(channels, groups, args.trials)
    print(f"{'C':>5} {'G':>4} {'classical_s':>12} {'gdwct_s':>10} {'speedup':>8}")
    ok = True
    for r in rows:
        print(f"{r['channels']:>5} {r['groups']:>4} {r['classical_s']:>12.6f} "
              f"{r['gdwct_s']:>10.6f} {r['speedup']:>8.1f}"
              + ("" if r["ordering_ok"] else "  ORDERING VIOLATED"))
        ok = ok and r["ordering_ok"]
    if args.kernels:
        print("\nkernel backends:")
        for r in bench.benchmark_kernels(trials=max(10, args.trials // 10)):
            print(f"  {r['kernel']:<14} compiled {r['compiled_s']:.6f}s  python {r['python_s']:.6f}s")
    return 0 if ok else 1


def cmd_gradcheck(args):
    scopes = GRADCHECK_SCOPES if args.scope == "all" else (args.scope,)
    worst_name, worst_err, ok = None, 0.0, True
    for scope in scopes:
        report = gradient_check(scope, trials=2, tolerance=1e-4, seed=args.seed)
        for name, err in report["checks"]:
            status = "ok" if err < report["tolerance"] else "FAIL"
            print(f"{scope:>16} {name:<24} max rel err {err:.3e}  {status}")
            if err > worst_err:
                worst_name, worst_err = f"{scope}/{name}", err
        ok = ok and report["ok"]
    if not ok:
        print(f"gradcheck FAILED; worst offender: {worst_name} ({worst_err:.3e})", file=sys.stderr)
        return 1
    return 0


def cmd_synth_data(args):
    dataset = data_io.synth_dataset(args.seed, args.n, args.size)
    out = Path(args.out)
    for sub, samples in (("domainA", dataset.domain_a), ("domainB", dataset.domain_b)):
        folder = out / sub
        folder.mkdir(parents=True, exist_ok=True)
        for i, sample in enumerate(samples):
            data_io.save_image(sample.pixels, folder / f"{i:04d}.png")
    print(f"wrote {args.n} samples per domain to {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="gdwct", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train on a two-domain dataset")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--data", help="dataset root with domainA/ and domainB/")
    p.add_argument("--synthetic", action="store_true", help="use the bundled synthetic domains")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iters", type=int, default=None, help="override total_iters")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("translate", help="exemplar-guided translation of one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--direction", default="a2b", choices=["a2b", "b2a"])
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("whiten", help="render the whitened feature without coloring")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--content", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--direction", default="a2b", choices=["a2b", "b2a"])
    p.set_defaults(fn=cmd_whiten)

    p = sub.add_parser("benchmark", help="classical WCT vs block-diagonal transform timing")
    p.add_argument("--channels", default="64,256")
    p.add_argument("--groups", default="16")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--kernels", action="store_true", help="also compare kernel backends")
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--scope", default="all", choices=["all", *GRADCHECK_SCOPES])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("synth-data", help="write the synthetic two-domain dataset as PNGs")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth_data)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FormatError, CheckpointError, ArgumentError,
            FileNotFoundError, NotADirectoryError) as e:
        print(f"gdwct {args.verb}: {e}", file=sys.stderr)
        return 2
    except AbortStepError as e:
        print(f"gdwct {args.verb}: aborted: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
