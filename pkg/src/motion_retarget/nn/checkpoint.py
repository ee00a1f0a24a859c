"""Self-describing checkpoint container.

Layout (all integers little-endian)::

    bytes 0..7    magic b"MRCKPT01"
    bytes 8..15   uint64 header length H
    next H bytes  UTF-8 JSON header
    remainder     tensor payloads, concatenated

The header is ``{"metadata": {...}, "tensors": [{"name", "dtype", "shape",
"offset", "nbytes"}, ...]}`` where ``offset`` counts from the start of the
payload section and ``dtype`` is ``"<f4"``, ``"<f8"`` or ``"<i8"``. Payloads are
raw C-order little-endian scalars.
"""
import hashlib
import json
import struct

import numpy as np
import torch

MAGIC = b"MRCKPT01"
_DTYPES = {torch.float32: "<f4", torch.float64: "<f8", torch.int64: "<i8"}


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(path, tensors: dict, metadata: dict):
    entries, payloads, offset = [], [], 0
    for name in sorted(tensors):
        t = tensors[name].detach().cpu().contiguous()
        dtype = _DTYPES.get(t.dtype)
        if dtype is None:
            raise TypeError(f"unsupported dtype {t.dtype} for {name}")
        raw = t.numpy().astype(dtype, copy=False).tobytes(order="C")
        entries.append({"name": name, "dtype": dtype, "shape": list(t.shape), "offset": offset, "nbytes": len(raw)})
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps({"metadata": metadata, "tensors": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in payloads:
            fh.write(raw)


def load_checkpoint(path):
    """Return ``(tensors, metadata)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16 : 16 + hlen].decode("utf-8"))
    base = 16 + hlen
    tensors = {}
    for e in header["tensors"]:
        start = base + e["offset"]
        arr = np.frombuffer(blob[start : start + e["nbytes"]], dtype=np.dtype(e["dtype"]))
        tensors[e["name"]] = torch.from_numpy(arr.reshape(e["shape"]).copy())
    return tensors, header["metadata"]
