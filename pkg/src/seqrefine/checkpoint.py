"""Named-tensor checkpoints: a flat little-endian binary plus a JSON manifest.

Binary layout, repeated per tensor::

    u32 name_len | name (utf-8) | u32 ndim | u32 dims[ndim] | f64 data[prod(dims)]
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np


def _paths(path: str | os.PathLike) -> tuple[str, str]:
    base = os.fspath(path)
    if base.endswith(".bin") or base.endswith(".json"):
        base = base.rsplit(".", 1)[0]
    return base + ".bin", base + ".json"


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    bin_path, json_path = _paths(path)
    os.makedirs(os.path.dirname(bin_path) or ".", exist_ok=True)
    entries = []
    with open(bin_path, "wb") as fh:
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype="<f8", order="C")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            offset = fh.tell()
            fh.write(arr.tobytes())
            entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
    with open(json_path, "w") as fh:
        json.dump({"format": "f64-le", "tensors": entries, "meta": meta or {}}, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    bin_path, json_path = _paths(path)
    if not os.path.exists(bin_path):
        raise FileNotFoundError(f"checkpoint {bin_path} not found; run `train` first")
    tensors: dict[str, np.ndarray] = {}
    with open(bin_path, "rb") as fh:
        buf = fh.read()
    pos = 0
    while pos < len(buf):
        (n,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        name = buf[pos:pos + n].decode("utf-8")
        pos += n
        (ndim,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
        pos += 8 * count
    meta = {}
    if os.path.exists(json_path):
        with open(json_path) as fh:
            meta = json.load(fh).get("meta", {})
    return tensors, meta
