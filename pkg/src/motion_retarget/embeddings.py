"""Per-joint embeddings: slot positional encodings, joint names and T-pose."""
from __future__ import annotations

import hashlib
import logging
import re
from typing import Protocol

import numpy as np
import torch
from torch import nn

from .errors import OddDimension
from .nn.layers import MLP

log = logging.getLogger(__name__)


def sinusoidal_pe(slots: int, dim: int) -> np.ndarray:
    """``pe[pos, 2k] = sin(pos / 10000**(2k/dim))``, ``pe[pos, 2k+1] = cos(...)``."""
    if dim % 2:
        raise OddDimension(f"positional encoding needs an even dimension, got {dim}")
    pos = np.arange(slots, dtype=np.float64)[:, None]
    freq = 10000.0 ** (np.arange(0, dim, 2, dtype=np.float64) / dim)
    pe = np.zeros((slots, dim))
    pe[:, 0::2] = np.sin(pos / freq)
    pe[:, 1::2] = np.cos(pos / freq)
    return pe


class NameEmbeddingProvider(Protocol):
    dim: int

    def embed(self, name: str) -> np.ndarray: ...

    def spec(self) -> dict: ...


_TOKEN = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+")
_SIDES = {"l": "left", "r": "right"}


def name_tokens(name: str):
    """Lowercase word tokens: camelCase split, digits and separators dropped, l/r expanded."""
    tokens = [t.lower() for t in _TOKEN.findall(re.sub(r"\d+", " ", name))]
    return [_SIDES.get(t, t) for t in tokens]


def normalize_name(name: str) -> str:
    return "".join(name_tokens(name))


def _hash(feature: str, seed: int):
    digest = hashlib.blake2b(f"{seed}:{feature}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def lexical_name_embed(name: str, dim: int, seed: int = 0) -> np.ndarray:
    """Hashed character-trigram and word-token features of the normalised name.

    Names that normalise to the same token sequence get bit-identical vectors.
    """
    if not name:
        raise ValueError("joint name must be non-empty")
    tokens = name_tokens(name)
    text = "".join(tokens) or name.lower()
    features = [f"c:{text[i:i + 3]}" for i in range(len(text) - 2)] if len(text) >= 3 else [f"c:{text}"]
    padded = f"^{text}$"
    features += [f"b:{padded[:3]}", f"b:{padded[-3:]}"]
    features += [f"w:{t}" for t in tokens]
    vec = np.zeros(dim)
    for feat in features:
        h = _hash(feat, seed)
        vec[h % dim] += 1.0 if (h >> 40) & 1 else -1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


class LexicalNameEmbedder:
    """Deterministic, dependency-free name embedder (the default provider)."""

    kind = "lexical"

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = int(dim)
        self.seed = int(seed)

    def embed(self, name: str) -> np.ndarray:
        return lexical_name_embed(name, self.dim, self.seed)

    def spec(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "seed": self.seed}


class TableNameEmbedder:
    """Precomputed name vectors, e.g. exported from an external text encoder.

    File format: one ``name<TAB>v1,v2,...,vD`` line per joint name. Lookups
    try the exact name first, then the normalised name. Unknown names go to
    ``fallback`` when one is given, otherwise raise KeyError.
    """

    kind = "table"

    def __init__(self, table: dict, fallback=None, path=None):
        if not table:
            raise ValueError("name table is empty")
        dims = {len(v) for v in table.values()}
        if len(dims) != 1:
            raise ValueError(f"name table rows have inconsistent lengths {sorted(dims)}")
        self.dim = dims.pop()
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.normalized = {normalize_name(k): v for k, v in self.table.items()}
        self.fallback = fallback
        self.path = None if path is None else str(path)
        if fallback is not None and fallback.dim != self.dim:
            raise ValueError("fallback provider dimension differs from the table")

    @classmethod
    def from_file(cls, path, fallback=None):
        table = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                try:
                    name, values = line.split("\t")
                    table[name] = [float(v) for v in values.split(",")]
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: expected 'name<TAB>v1,...,vD'") from None
        return cls(table, fallback, path)

    def embed(self, name: str) -> np.ndarray:
        if name in self.table:
            return self.table[name]
        key = normalize_name(name)
        if key in self.normalized:
            return self.normalized[key]
        if self.fallback is not None:
            return self.fallback.embed(name)
        raise KeyError(f"no embedding for joint name {name!r}")

    def spec(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "path": self.path}


def provider_from_spec(spec: dict):
    if spec["kind"] == "lexical":
        return LexicalNameEmbedder(spec["dim"], spec.get("seed", 0))
    if spec["kind"] == "table":
        return TableNameEmbedder.from_file(spec["path"])
    raise ValueError(f"unknown name provider kind {spec['kind']!r}")


class TPoseEmbedding(nn.Module):
    """Two-layer GELU MLP from padded root-relative T-pose positions to ``D``."""

    def __init__(self, dim: int, zero_init: bool = False):
        super().__init__()
        self.mlp = MLP(3, dim, dim, zero_last=zero_init)

    def forward(self, positions: torch.Tensor) -> torch.Tensor:
        return self.mlp(positions)
