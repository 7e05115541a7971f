"""Self-describing binary checkpoints.

Layout: magic "GDWCT1", a length-prefixed JSON metadata blob, then a count
of records, each record being length-prefixed name, rank, dims, and raw
little-endian float64 data.
"""

import json
import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"GDWCT1"


def save_checkpoint(path, meta, arrays):
    """Write metadata (a JSON-serializable dict) and named float64 arrays."""
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(struct.pack("<Q", len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype="<f8")
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(np.ascontiguousarray(arr).tobytes())


def _read(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return buf


def load_checkpoint(path):
    """Read back (meta, arrays); raises CheckpointError on a corrupt file."""
    with open(path, "rb") as f:
        if _read(f, len(MAGIC), "magic") != MAGIC:
            raise CheckpointError(f"{path}: bad magic bytes (not a GDWCT checkpoint)")
        (blob_len,) = struct.unpack("<I", _read(f, 4, "metadata length"))
        try:
            meta = json.loads(_read(f, blob_len, "metadata").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: unreadable metadata: {e}") from e
        (count,) = struct.unpack("<Q", _read(f, 8, "record count"))
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read(f, 4, "name length"))
            name = _read(f, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read(f, 4, "rank"))
            shape = tuple(
                struct.unpack("<Q", _read(f, 8, f"dim of {name}"))[0] for _ in range(ndim)
            )
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(_read(f, 8 * n, f"data of {name}"), dtype="<f8")
            arrays[name] = data.reshape(shape).astype(np.float64)
        return meta, arrays
