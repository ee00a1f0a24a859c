"""Encoder + decoder bundle with per-skeleton context caching and checkpoint I/O."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .decoder import DecodeOutput, DecoderConfig, RetargetDecoder
from .embeddings import provider_from_spec
from .encoder import EncoderConfig, MotionEncoder
from .errors import ConfigMismatch
from .features import MotionBatch, SkeletonBatch, SkeletonContext
from .nn.checkpoint import config_hash, load_checkpoint, save_checkpoint
from .rotations import matrix_to_rotation6d, rotation6d_to_matrix
from .skeleton import Motion, Skeleton

DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    name_provider: dict = field(default_factory=lambda: {"kind": "lexical", "dim": 64, "seed": 0})
    share_joints: bool = True
    use_positions: bool = True
    window_length: int = 64
    dtype: str = "float32"

    def __post_init__(self):
        if self.encoder.d_model != self.decoder.d_model:
            raise ConfigMismatch(
                f"encoder d_model {self.encoder.d_model} != decoder d_model {self.decoder.d_model}"
            )
        if self.encoder.name_dim != self.decoder.name_dim:
            raise ConfigMismatch("encoder and decoder must share name_dim")
        if self.window_length < 2:
            raise ValueError("window_length must be >= 2")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {sorted(DTYPES)}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        enc = EncoderConfig(**d.pop("encoder", {}))
        dec = DecoderConfig(**d.pop("decoder", {}))
        return cls(encoder=enc, decoder=dec, **d)

    def hash(self):
        return config_hash(self.to_dict())


@dataclass
class RetargetOutput:
    """One decoded sample: a motion on the target skeleton plus pre-head features ``(T, N, D)``."""

    motion: Motion
    raw_features: np.ndarray


def _clean_rot6d(r):
    """Re-orthonormalise in double precision so the result is a valid 6D array."""
    return matrix_to_rotation6d(rotation6d_to_matrix(np.asarray(r, dtype=np.float64)))


class RetargetModel(nn.Module):
    def __init__(self, config: ModelConfig = None, provider=None, keyword_table=None):
        super().__init__()
        config = config or ModelConfig()
        self.config = config
        self.provider = provider or provider_from_spec(config.name_provider)
        if self.provider.dim != config.encoder.name_dim:
            raise ConfigMismatch(
                f"name provider dim {self.provider.dim} != model name_dim {config.encoder.name_dim}"
            )
        self.keyword_table = keyword_table
        self.encoder = MotionEncoder(config.encoder)
        self.decoder = RetargetDecoder(config.decoder)
        self._contexts = {}
        self.to(DTYPES[config.dtype])

    @property
    def dtype(self):
        return next(self.parameters()).dtype

    def context(self, skeleton: Skeleton) -> SkeletonContext:
        ctx = self._contexts.get(skeleton)
        if ctx is None:
            ctx = SkeletonContext.build(skeleton, self.provider, self.config.share_joints, self.keyword_table)
            self._contexts[skeleton] = ctx
        return ctx

    def skeleton_batch(self, skeletons: Sequence[Skeleton], extra_padding=0) -> SkeletonBatch:
        return SkeletonBatch.build([self.context(s) for s in skeletons], extra_padding, self.dtype)

    def motion_batch(self, skeletons, motions, extra_padding=0) -> MotionBatch:
        contexts = [self.context(s) for s in skeletons]
        return MotionBatch.from_motions(contexts, list(motions), extra_padding, self.dtype)

    def encode(self, batch: MotionBatch, joint_mask_prob=0.0, generator=None):
        return self.encoder(batch, self.config.use_positions, joint_mask_prob, generator)

    def decode(self, h, targets: SkeletonBatch, generator=None, seed=0) -> DecodeOutput:
        return self.decoder(h, targets, generator=generator, seed=seed)

    def to_outputs(self, out: DecodeOutput, targets: SkeletonBatch, fps=30.0, root_scale=None):
        """Split a decoded batch into per-sample outputs.

        Root positions are multiplied by ``root_scale[k]`` (default: the target
        root height, i.e. the source-normalised trajectory renormalised).
        """
        results = []
        for k, ctx in enumerate(targets.contexts):
            n = ctx.n_joints
            scale = ctx.root_height if root_scale is None else root_scale[k]
            root = out.root[:, k].detach().double().numpy() * scale
            rot = _clean_rot6d(out.rot6d[:, k, :n].detach().double().numpy())
            feats = out.features[:, k, :n].detach().double().numpy()
            results.append(RetargetOutput(Motion(root, rot, fps), feats))
        return results

    def metadata(self, **extra):
        meta = {
            "format": "motion_retarget.checkpoint/1",
            "model_config": self.config.to_dict(),
            "config_hash": self.config.hash(),
            "name_provider": self.provider.spec(),
        }
        meta.update(extra)
        return meta

    def save(self, path, **extra):
        save_checkpoint(path, dict(self.state_dict()), self.metadata(**extra))

    @classmethod
    def load(cls, path, provider=None, keyword_table=None, expected_config=None):
        tensors, meta = load_checkpoint(path)
        config = ModelConfig.from_dict(meta["model_config"])
        if meta.get("config_hash") != config.hash():
            raise ConfigMismatch(f"{path}: stored config hash does not match its model config")
        if expected_config is not None and expected_config.hash() != config.hash():
            raise ConfigMismatch(
                f"{path}: checkpoint config {config.hash()} != expected {expected_config.hash()}"
            )
        model = cls(config, provider or provider_from_spec(meta["name_provider"]), keyword_table)
        missing = set(model.state_dict()) ^ set(tensors)
        if missing:
            raise ConfigMismatch(f"{path}: parameter names differ from the model: {sorted(missing)[:5]}")
        model.load_state_dict(tensors)
        model.checkpoint_metadata = meta
        return model
