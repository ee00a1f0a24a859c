"""Skeleton-agnostic motion encoder.

Per body part: lift joint features to ``D``, add slot, name and T-pose
embeddings, pool the part's joints into ``m`` tokens with learnable queries.
The ``6m`` tokens per frame then go through a transformer over time and parts.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

from .embeddings import TPoseEmbedding, sinusoidal_pe
from .errors import HeadsDivisibility, NoValidTokens
from .features import JOINT_DIM, ROOT_DIM, MotionBatch, SkeletonBatch
from .grouping import gather_padded
from .nn.attention import attention_pool
from .nn.layers import MLP, init_linear
from .nn.transformer import ATTENTION_MODES, EncoderLayer

N_GROUPS = 6


@dataclass(frozen=True)
class EncoderConfig:
    d_model: int = 64
    pool_queries: int = 4
    layers: int = 4
    heads: int = 4
    ff_mult: int = 4
    dropout: float = 0.1
    attention: str = "full"
    name_dim: int = 64
    strict_groups: bool = False

    def __post_init__(self):
        if self.d_model % self.heads:
            raise HeadsDivisibility(f"d_model={self.d_model} not divisible by heads={self.heads}")
        if self.pool_queries < 1:
            raise ValueError("pool_queries must be >= 1")
        if self.attention not in ATTENTION_MODES:
            raise ValueError(f"attention must be one of {ATTENTION_MODES}")
        if self.d_model % 2:
            raise ValueError("d_model must be even for sinusoidal encodings")

    @property
    def tokens(self):
        return N_GROUPS * self.pool_queries

    def to_dict(self):
        return asdict(self)


class SkeletonEmbedding(nn.Module):
    """Slot PE + projected name vectors + T-pose MLP, in padded group layout."""

    def __init__(self, d_model, name_dim):
        super().__init__()
        self.d_model = d_model
        self.name_proj = init_linear(nn.Linear(name_dim, d_model, bias=False))
        self.tpose = TPoseEmbedding(d_model)

    def forward(self, skeletons: SkeletonBatch):
        """Per-group ``(B, P_i, D)`` embeddings (zeros in padded slots)."""
        per_joint = self.name_proj(skeletons.names) + self.tpose(skeletons.tpose)
        grouped, masks = gather_padded(per_joint.unsqueeze(0), skeletons.groups)
        out = []
        for g, m in zip(grouped, masks):
            pe = torch.from_numpy(sinusoidal_pe(g.shape[2], self.d_model)).to(g.dtype)
            out.append((g[0] + pe) * m.unsqueeze(-1).to(g.dtype))
        return out


def frame_encoding(frames, d_model, dtype):
    return torch.from_numpy(sinusoidal_pe(frames, d_model)).to(dtype)


class MotionEncoder(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        d, m = config.d_model, config.pool_queries
        self.root_in = MLP(ROOT_DIM, d, d)
        self.joint_in = MLP(JOINT_DIM, d, d)
        self.embedding = SkeletonEmbedding(d, config.name_dim)
        self.queries = nn.Parameter(torch.rand(N_GROUPS, m, d))
        self.absent = nn.Parameter(torch.zeros(N_GROUPS, m, d))
        self.layers = nn.ModuleList(
            EncoderLayer(d, config.heads, config.ff_mult, config.dropout, config.attention)
            for _ in range(config.layers)
        )
        self.norm = nn.LayerNorm(d) if config.layers else nn.Identity()

    def joint_features(self, batch: MotionBatch, use_positions=True):
        """Lift raw joint features to ``(T, B, Nmax, D)``; joint 0 is the root."""
        root, joints = batch.raw_features(use_positions)
        lifted = self.joint_in(joints[:, :, 1:])
        return torch.cat([self.root_in(root).unsqueeze(2), lifted], dim=2)

    def spatial_stage(self, features, skeletons: SkeletonBatch, joint_mask_prob=0.0, generator=None):
        """Pool each group's enhanced joint tokens into ``m`` tokens: (T, B, 6m, D)."""
        if joint_mask_prob > 0:
            keep = torch.rand(features.shape[:3], generator=generator) >= joint_mask_prob
            keep[:, :, 0] = True
            features = features * keep.unsqueeze(-1).to(features.dtype)
        grouped, masks = gather_padded(features, skeletons.groups)
        embeds = self.embedding(skeletons)
        pooled = []
        for g, (x, mask, emb) in enumerate(zip(grouped, masks, embeds)):
            x = x + emb.unsqueeze(0)
            present = mask.any(dim=1)
            if x.shape[2] == 0:
                if self.config.strict_groups:
                    raise NoValidTokens(f"group {g} is empty for every skeleton in the batch")
                t, b = x.shape[:2]
                pooled.append(self.absent[g].expand(t, b, -1, -1))
                continue
            if bool(present.all()):
                pooled.append(attention_pool(x, self.queries[g], mask.unsqueeze(0)))
                continue
            if self.config.strict_groups:
                raise NoValidTokens(f"group {g} is empty for some skeleton in the batch")
            safe = mask.clone()
            safe[~present, 0] = True
            z = attention_pool(x, self.queries[g], safe.unsqueeze(0))
            absent = self.absent[g].expand_as(z)
            pooled.append(torch.where(present.view(1, -1, 1, 1), z, absent))
        return torch.cat(pooled, dim=2)

    def temporal_stage(self, z):
        h = z + frame_encoding(z.shape[0], self.config.d_model, z.dtype).view(z.shape[0], 1, 1, -1)
        for layer in self.layers:
            h = layer(h)
        return self.norm(h)

    def forward(self, batch: MotionBatch, use_positions=True, joint_mask_prob=0.0, generator=None):
        """Representation ``H`` of shape (T, B, 6m, D)."""
        features = self.joint_features(batch, use_positions)
        z = self.spatial_stage(features, batch.skeletons, joint_mask_prob, generator)
        return self.temporal_stage(z)
