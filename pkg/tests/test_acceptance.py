"""Acceptance gate: ten end-to-end checks, one test per criterion.

Run with `pytest tests/test_acceptance.py -v` (add -s for the detail lines).
The training-descent and benchmark checks dominate the runtime; expect the
full file to take tens of minutes on one desktop core.
"""

import time

import numpy as np
import pytest

from gdwct import cli, data_io, linalg, networks
from gdwct.tensor import Tensor
from gdwct.trainer import Trainer, TrainConfig, gradient_check, train_step
from gdwct.transform import (GroupSpec, build_coloring, coloring_regularizer,
                             normalize_columns, whitening_regularizer)


def detail(criterion, ok, text):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {text}")
    assert ok, text


def test_criterion_01_oracle_whitening_identity_covariance():
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        f = rng.normal(size=(8, 512)) * rng.uniform(0.5, 3.0, size=(8, 1))
        cov = linalg.covariance(linalg.whiten_classical(f))
        worst = max(worst, float(np.linalg.norm(cov - np.eye(8))))
    elapsed = time.perf_counter() - t0
    detail(1, worst <= 1e-6 and elapsed < 1.0,
           f"whitened covariance Frobenius error {worst:.2e} (tol 1e-6), "
           f"100 cases in {elapsed:.3f}s (< 1s)")


def test_criterion_02_oracle_coloring_matches_style_covariance():
    rng = np.random.default_rng(1002)
    worst = 0.0
    for _ in range(100):
        white = linalg.whiten_classical(rng.normal(size=(8, 512)))
        style = rng.normal(size=(8, 512)) * rng.uniform(0.5, 2.0, size=(8, 1))
        got = linalg.covariance(linalg.color_classical(white, style))
        want = linalg.covariance(style - style.mean(axis=1, keepdims=True))
        worst = max(worst, float(np.linalg.norm(got - want)))
    detail(2, worst <= 1e-5,
           f"colored covariance Frobenius error {worst:.2e} (tol 1e-5), 100 cases")


def test_criterion_03_regularizer_optima():
    # exactly group-whitened input: rows with exact zero mean, unit variance,
    # zero cross-correlation in float arithmetic
    row1 = np.array([1.0, -1.0, 1.0, -1.0, 0.0])
    row2 = np.array([1.0, 1.0, -1.0, -1.0, 0.0])
    f = np.stack([row1, row2, row1, row2])
    rw_opt = whitening_regularizer(Tensor(f), GroupSpec(4, 2)).item()

    rc_opt = coloring_regularizer([Tensor(np.eye(3)), Tensor(np.eye(3))]).item()

    rng = np.random.default_rng(1003)
    rw_pos = min(
        whitening_regularizer(Tensor(rng.normal(size=(4, 32))), GroupSpec(4, 2)).item()
        for _ in range(20))
    rc_pos = min(
        coloring_regularizer([normalize_columns(Tensor(rng.normal(size=(3, 3))))[0]]).item()
        for _ in range(20))

    detail(3, rw_opt == 0.0 and rc_opt == 0.0 and rw_pos > 0.0 and rc_pos > 0.0,
           f"R_w at optimum {rw_opt!r} (exact 0), R_c at optimum {rc_opt!r} (exact 0), "
           f"min random R_w {rw_pos:.3e} > 0, min random R_c {rc_pos:.3e} > 0")


def test_criterion_04_block_diagonal_equivalence():
    rng = np.random.default_rng(1004)
    worst = 0.0
    for _ in range(50):
        g = int(rng.integers(1, 9))
        gd = int(rng.integers(1, 9))
        c_ch = g * gd
        if c_ch > 64:
            continue
        feat = rng.normal(size=(c_ch, 16))
        cw = feat - feat.mean(axis=1, keepdims=True)
        st = build_coloring(Tensor(rng.normal(size=(g, gd, gd))))
        full = st.X.data @ cw
        per_group = np.concatenate(
            [st.per_group_ct.data[i] @ cw[gd * i:gd * (i + 1)] for i in range(g)])
        worst = max(worst, float(np.abs(full - per_group).max()))
    detail(4, worst <= 1e-12,
           f"per-group vs assembled X worst deviation {worst:.2e} (tol 1e-12), 50 configs")


def test_criterion_05_gradient_suite():
    t0 = time.perf_counter()
    worst, all_ok = 0.0, True
    for scope in ("gdwct", "losses", "networks-small"):
        report = gradient_check(scope, trials=2, tolerance=1e-4, seed=0)
        worst = max(worst, report["max_rel_err"])
        all_ok = all_ok and report["ok"]
    elapsed = time.perf_counter() - t0
    detail(5, all_ok and elapsed < 60.0,
           f"max relative gradient error {worst:.2e} (tol 1e-4) in {elapsed:.1f}s (< 60s)")


def test_criterion_06_parameter_count_identity():
    configs = [(16, 4), (32, 4), (64, 8), (128, 16), (256, 16), (256, 4), (24, 8)]
    ok = all(networks.style_representation_size(c, g) == c * c // g for c, g in configs)
    ok = ok and networks.style_representation_size(256, 16) == 4096
    detail(6, ok, "per-hop style representation size equals C^2/G for all configs; "
                  "C=256, G=16 gives 4096")


@pytest.fixture(scope="module")
def descent_runs():
    """Full 2000-iteration synthetic runs for three seeds (the long pole)."""
    results = []
    for seed in (0, 1, 2):
        flat = TrainConfig().to_flat()
        flat.update({"seed": seed, "checkpoint_every": 0, "sample_every": 0})
        cfg = TrainConfig.from_flat(flat)
        ds = data_io.synth_dataset(seed, n_per_domain=16, size=cfg.net.image_size)
        tr = Trainer(cfg)
        batch_fn = data_io.batch_provider(ds, cfg.batch_size)
        t0 = time.perf_counter()
        reports = tr.run(batch_fn)
        results.append({
            "seed": seed,
            "first": reports[0].to_dict(),
            "last": reports[-1].to_dict(),
            "minutes": (time.perf_counter() - t0) / 60.0,
        })
    return results


def test_criterion_07_training_descent(descent_runs):
    ratios = {k: sorted(r["last"][k] / r["first"][k] for r in descent_runs)[1]
              for k in ("r_w", "r_c", "style", "cycle")}
    slowest = max(r["minutes"] for r in descent_runs)
    ok = (ratios["r_w"] < 0.5 and ratios["r_c"] < 0.5
          and ratios["style"] < 1.0 and ratios["cycle"] < 1.0
          and slowest < 30.0)
    detail(7, ok,
           f"median ratios over 3 seeds at 2000 iters: R_w {ratios['r_w']:.3f} (< 0.5), "
           f"R_c {ratios['r_c']:.3f} (< 0.5), style {ratios['style']:.3f} (< 1), "
           f"cycle {ratios['cycle']:.3f} (< 1); slowest run {slowest:.1f} min (< 30)")


def test_criterion_08_benchmark_ordering():
    from gdwct import bench
    rows = bench.benchmark_transform([256], [16], trials=100)
    row = rows[0]
    detail(8, row["gdwct_s"] < row["classical_s"],
           f"C=256 G=16 over 100 trials: gdwct {row['gdwct_s']:.4f}s < "
           f"classical {row['classical_s']:.4f}s (speedup {row['speedup']:.0f}x)")


def test_criterion_09_determinism_and_resume(tmp_path):
    outs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        rc = cli.main(["train", "--synthetic", "--out", str(out),
                       "--iters", "8", "--seed", "0"])
        assert rc == 0
        outs.append(out)
    identical = ((outs[0] / "metrics.ndjson").read_bytes()
                 == (outs[1] / "metrics.ndjson").read_bytes())

    flat = TrainConfig().to_flat()
    flat.update({"seed": 0, "total_iters": 4, "checkpoint_every": 0, "sample_every": 0})
    cfg = TrainConfig.from_flat(flat)
    ds = data_io.synth_dataset(0, n_per_domain=8, size=cfg.net.image_size)
    batch_fn = data_io.batch_provider(ds, cfg.batch_size)
    tr = Trainer(cfg)
    tr.run(batch_fn)
    ckpt = tmp_path / "resume.ckpt"
    tr.save(ckpt)
    x_a, x_b = batch_fn(4)
    expected = train_step(tr.model_a, tr.model_b, x_a, x_b,
                          tr.opt_d, tr.opt_g, cfg, 4).to_dict()
    resumed = Trainer.load(ckpt)
    got = train_step(resumed.model_a, resumed.model_b, x_a, x_b,
                     resumed.opt_d, resumed.opt_g, cfg, 4).to_dict()
    detail(9, identical and got == expected,
           f"metrics files byte-identical: {identical}; "
           f"post-resume step reproduces every loss term exactly: {got == expected}")


def test_criterion_10_whitening_visualization_path(tmp_path):
    out = tmp_path / "run"
    rc = cli.main(["train", "--synthetic", "--out", str(out),
                   "--iters", "6", "--seed", "0"])
    assert rc == 0
    data = tmp_path / "data"
    assert cli.main(["synth-data", "--out", str(data), "--n", "1", "--size", "32"]) == 0
    content = data / "domainA" / "0000.png"
    ckpt = out / "checkpoint_final.ckpt"

    whitened = tmp_path / "whitened.png"
    recon = tmp_path / "recon.png"
    assert cli.main(["whiten", "--checkpoint", str(ckpt),
                     "--content", str(content), "--out", str(whitened)]) == 0
    assert cli.main(["translate", "--checkpoint", str(ckpt),
                     "--content", str(content), "--style", str(content),
                     "--out", str(recon)]) == 0
    w = data_io.load_image(whitened, 32).pixels.data
    r = data_io.load_image(recon, 32).pixels.data
    mad = float(np.abs(w - r).mean())
    detail(10, mad > 0.0,
           f"cmd_whiten output vs plain reconstruction mean absolute difference "
           f"{mad:.4f} > 0")
