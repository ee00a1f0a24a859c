"""Skeleton-specific decoder: noise queries conditioned on the target skeleton,
cross-attending to the motion representation."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .encoder import SkeletonEmbedding, frame_encoding
from .errors import ConfigMismatch, HeadsDivisibility, ZeroRootHeight
from .features import JOINT_DIM, ROOT_DIM, SkeletonBatch
from .grouping import gather_padded, scatter_unpad
from .nn.kinematics import normalize_rot6d
from .nn.layers import MLP, init_linear
from .nn.transformer import ATTENTION_MODES, DecoderLayer
from .skeleton import TPose

NOISE_POLICIES = ("per-call", "fixed")


@dataclass(frozen=True)
class DecoderConfig:
    d_model: int = 64
    layers: int = 4
    heads: int = 4
    ff_mult: int = 4
    dropout: float = 0.1
    attention: str = "full"
    name_dim: int = 64
    noise_seed_policy: str = "per-call"

    def __post_init__(self):
        if self.d_model % self.heads:
            raise HeadsDivisibility(f"d_model={self.d_model} not divisible by heads={self.heads}")
        if self.attention not in ATTENTION_MODES:
            raise ValueError(f"attention must be one of {ATTENTION_MODES}")
        if self.noise_seed_policy not in NOISE_POLICIES:
            raise ValueError(f"noise_seed_policy must be one of {NOISE_POLICIES}")

    def to_dict(self):
        return asdict(self)


@dataclass
class DecodeOutput:
    """Decoded motion in model units.

    ``root``: (T, B, 3) root position over source root height; ``rot6d``:
    (T, B, Nmax, 6) orthonormalised local rotations, identity on padded
    joints; ``features``: (T, B, Nmax, D) pre-head joint features.
    """

    root: torch.Tensor
    rot6d: torch.Tensor
    features: torch.Tensor


def renormalize_root(root_traj, source_tpose: TPose, target_tpose: TPose):
    """Rescale a source-scale root trajectory by the target/source root-height ratio."""
    if not (source_tpose.root_height > 0 and target_tpose.root_height > 0):
        raise ZeroRootHeight("root heights must be positive to renormalise a trajectory")
    return np.asarray(root_traj, dtype=np.float64) * (target_tpose.root_height / source_tpose.root_height)


def _identity6d(dtype):
    return torch.tensor([1.0, 0.0, 0.0, 0.0, 1.0, 0.0], dtype=dtype)


class RetargetDecoder(nn.Module):
    def __init__(self, config: DecoderConfig):
        super().__init__()
        self.config = config
        d = config.d_model
        self.root_in = MLP(ROOT_DIM, d, d)
        self.joint_in = MLP(JOINT_DIM, d, d)
        self.embedding = SkeletonEmbedding(d, config.name_dim)
        self.kv = MLP(d, d, 2 * d)
        self.layers = nn.ModuleList(
            DecoderLayer(d, config.heads, config.ff_mult, config.dropout, config.attention)
            for _ in range(config.layers)
        )
        self.norm = nn.LayerNorm(d)
        self.root_head = init_linear(nn.Linear(d, 9))
        self.joint_head = init_linear(nn.Linear(d, 6))

    def build_input(self, skeletons: SkeletonBatch, frames: int, generator: torch.Generator):
        """Grouped decoder input: uniform noise lifted to ``D`` plus target embeddings.

        Noise is drawn per real joint, (T, B, Nmax, 12), so it does not depend on
        how far the groups are padded.
        """
        dtype = skeletons.names.dtype
        noise = torch.rand(frames, skeletons.batch_size, skeletons.n_max, ROOT_DIM, generator=generator, dtype=dtype)
        lifted = torch.cat(
            [self.root_in(noise[:, :, :1]), self.joint_in(noise[:, :, 1:, :JOINT_DIM])], dim=2
        )
        grouped, masks = gather_padded(lifted, skeletons.groups)
        embeds = self.embedding(skeletons)
        frame_pe = frame_encoding(frames, self.config.d_model, dtype).view(frames, 1, 1, -1)
        return [
            (y + e.unsqueeze(0) + frame_pe) * m.view(1, m.shape[0], -1, 1).to(dtype)
            for y, e, m in zip(grouped, embeds, masks)
        ]

    def forward(self, h, skeletons: SkeletonBatch, generator=None, seed=0) -> DecodeOutput:
        if h.shape[-1] != self.config.d_model:
            raise ConfigMismatch(f"representation dim {h.shape[-1]} != decoder d_model {self.config.d_model}")
        if h.shape[1] != skeletons.batch_size:
            raise ConfigMismatch(f"representation batch {h.shape[1]} != {skeletons.batch_size} target skeletons")
        # "fixed" ignores the caller's stream so every call sees the same noise
        if generator is None or self.config.noise_seed_policy == "fixed":
            generator = torch.Generator().manual_seed(int(seed))
        frames = h.shape[0]
        groups = self.build_input(skeletons, frames, generator)
        sizes = [g.shape[2] for g in groups]
        y = torch.cat(groups, dim=2)
        slot_mask = skeletons.groups.flat_mask()
        keys, values = self.kv(h).chunk(2, dim=-1)
        for layer in self.layers:
            y = layer(y, keys, values, slot_mask)
        y = self.norm(y)
        feats = scatter_unpad(torch.split(y, sizes, dim=2), skeletons.groups)
        ident = _identity6d(y.dtype)
        root_out = self.root_head(feats[:, :, 0])
        root = root_out[..., :3] + torch.tensor([0.0, 1.0, 0.0], dtype=y.dtype)
        raw = torch.cat([(root_out[..., 3:] + ident).unsqueeze(2), self.joint_head(feats[:, :, 1:]) + ident], dim=2)
        rot = normalize_rot6d(raw)
        mask = skeletons.groups.joint_mask.view(1, skeletons.batch_size, -1, 1)
        rot = torch.where(mask, rot, ident)
        return DecodeOutput(root, rot, feats)
