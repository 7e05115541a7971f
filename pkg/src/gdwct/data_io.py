"""Image decoding/encoding, two-domain dataset ingestion, synthetic data,
and key=value config parsing."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ArgumentError, ConfigError, FormatError
from .tensor import Tensor


@dataclass
class ImageSample:
    pixels: Tensor  # [3, S, S] in [-1, 1]
    source_path: Optional[str] = None


@dataclass
class DatasetPair:
    domain_a: List[ImageSample]
    domain_b: List[ImageSample]
    shuffle_seed: int = 0


def load_image(path, target_size, center_crop=False):
    """Decode an 8-bit RGB PNG, optionally center-crop square, resize bilinear,
    and map [0, 255] to [-1, 1]."""
    try:
        img = Image.open(path)
    except FileNotFoundError:
        raise
    except UnidentifiedImageError as e:
        raise FormatError(f"{path}: not a decodable image") from e
    if img.format != "PNG":
        raise FormatError(f"{path}: expected PNG, got {img.format}")
    if img.mode != "RGB":
        raise FormatError(f"{path}: expected 8-bit RGB, got mode {img.mode}")
    if center_crop:
        side = min(img.size)
        left = (img.size[0] - side) // 2
        top = (img.size[1] - side) // 2
        img = img.crop((left, top, left + side, top + side))
    if img.size != (target_size, target_size):
        img = img.resize((target_size, target_size), Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float64)  # [S, S, 3]
    arr = arr.transpose(2, 0, 1) * (2.0 / 255.0) - 1.0
    return ImageSample(pixels=Tensor(arr), source_path=str(path))


def save_image(t, path):
    """Quantize a [3, S, S] tensor in [-1, 1] to an 8-bit RGB PNG."""
    arr = t.data if isinstance(t, Tensor) else np.asarray(t)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise FormatError(f"save_image expects [3, S, S], got {arr.shape}")
    arr = np.clip(arr, -1.0, 1.0)
    q = np.rint((arr + 1.0) * (255.0 / 2.0)).astype(np.uint8)
    Image.fromarray(q.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")


def synth_dataset(seed, n_per_domain, size):
    """Procedural two-domain stand-in: bright ellipses on dark noise (A) vs
    dark diagonal stripes on bright noise (B). Deterministic per seed."""
    if n_per_domain < 1:
        raise ArgumentError("n_per_domain must be >= 1")
    rng = np.random.default_rng([int(seed), 0x5D17])
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    tint = np.array([1.0, 0.92, 0.84])[:, None, None]

    domain_a = []
    for _ in range(n_per_domain):
        img = -0.65 + 0.08 * rng.standard_normal((3, size, size))
        cx, cy = rng.uniform(0.35, 0.65, 2) * size
        rx, ry = rng.uniform(0.18, 0.32, 2) * size
        ang = rng.uniform(0.0, np.pi)
        dx, dy = xx - cx, yy - cy
        u = dx * np.cos(ang) + dy * np.sin(ang)
        v = -dx * np.sin(ang) + dy * np.cos(ang)
        mask = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0
        img = np.where(mask, (0.7 + 0.08 * rng.standard_normal((3, size, size))) * tint, img)
        domain_a.append(ImageSample(Tensor(np.clip(img, -1.0, 1.0))))

    domain_b = []
    for _ in range(n_per_domain):
        img = 0.65 + 0.08 * rng.standard_normal((3, size, size))
        period = rng.integers(5, 9)
        phase = rng.uniform(0.0, period)
        mask = ((xx + yy + phase) % period) < 0.4 * period
        dark = (-0.55 + 0.08 * rng.standard_normal((3, size, size))) * tint
        img = np.where(mask, dark, img)
        domain_b.append(ImageSample(Tensor(np.clip(img, -1.0, 1.0))))

    return DatasetPair(domain_a=domain_a, domain_b=domain_b, shuffle_seed=int(seed))


def _decode_workers():
    raw = os.environ.get("GDWCT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def load_dataset(root, size, center_crop=False):
    """Load <root>/domainA/*.png and <root>/domainB/*.png (unpaired)."""
    root = Path(root)
    samples = {}
    for key, sub in (("a", "domainA"), ("b", "domainB")):
        folder = root / sub
        if not folder.is_dir():
            raise FileNotFoundError(f"missing dataset folder {folder}")
        paths = sorted(folder.glob("*.png"))
        if not paths:
            raise FileNotFoundError(f"no PNG files in {folder}")
        workers = _decode_workers()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                samples[key] = list(pool.map(lambda p: load_image(p, size, center_crop), paths))
        else:
            samples[key] = [load_image(p, size, center_crop) for p in paths]
    return DatasetPair(domain_a=samples["a"], domain_b=samples["b"])


def batch_indices(seed, iteration, n, batch_size):
    """Deterministic per-iteration sample indices (pure function of seed+iter)."""
    rng = np.random.default_rng([int(seed), 0xB47C, int(iteration)])
    replace = n < batch_size
    return rng.choice(n, size=batch_size, replace=replace)


def make_batch(samples, indices):
    return Tensor(np.stack([samples[i].pixels.data for i in indices]))


def batch_provider(dataset, batch_size):
    """Return batch_fn(iteration) -> (x_a, x_b) with deterministic order."""

    def batch_fn(iteration):
        ia = batch_indices(dataset.shuffle_seed, iteration, len(dataset.domain_a), batch_size)
        ib = batch_indices(dataset.shuffle_seed + 1, iteration, len(dataset.domain_b), batch_size)
        return make_batch(dataset.domain_a, ia), make_batch(dataset.domain_b, ib)

    return batch_fn


# ----------------------------------------------------------------- config files

_INT_KEYS = {
    "batch_size", "total_iters", "decay_start_iter", "decay_every", "seed",
    "base_channels", "n_res_blocks", "n_hops", "groups", "image_size",
    "mlp_depth", "sample_every", "checkpoint_every",
}
_FLOAT_KEYS = {
    "lr", "beta1", "beta2", "adam_eps", "decay_rate",
    "lambda_latent", "lambda_pixel", "lambda_w", "lambda_c",
}


def parse_config_text(text):
    """Parse key=value lines ('#' comments) into a TrainConfig.

    Unknown keys are rejected; missing keys take the documented defaults.
    """
    from .trainer import TrainConfig  # deferred: trainer does not import data_io

    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", line=lineno)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _INT_KEYS and key not in _FLOAT_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        try:
            values[key] = int(val) if key in _INT_KEYS else float(val)
        except ValueError:
            raise ConfigError(f"cannot parse value {val!r} for {key!r}", line=lineno)
        lines[key] = lineno
    try:
        return TrainConfig.from_flat(values)
    except Exception as e:
        # attribute the invariant violation to the offending key's line if we can
        culprit = next((k for k in lines if k in str(e) or k.split("_")[0] in str(e)), None)
        raise ConfigError(str(e), line=lines.get(culprit)) from e


def load_config(path):
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def config_to_text(cfg):
    """Serialize a TrainConfig back to key=value lines (for run manifests)."""
    flat = cfg.to_flat()
    return "\n".join(f"{k}={flat[k]}" for k in sorted(flat)) + "\n"
