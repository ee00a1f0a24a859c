"""Per-skeleton cached context and batched motion tensors for the model.

Model units: root position and velocity are divided by the T-pose root
height; root-relative joint positions and T-pose positions are divided by the
character height.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from .errors import ZeroRootHeight
from .grouping import GroupBatch, PartGrouping, classify_joints
from .nn import kinematics
from .rotations import identity6d
from .skeleton import Motion, Skeleton, TPose, check_motion, compute_tpose

ROOT_DIM = 12
JOINT_DIM = 9


@dataclass(eq=False)
class SkeletonContext:
    """Everything the model needs to know about one skeleton, computed once."""

    skeleton: Skeleton
    tpose: TPose
    grouping: PartGrouping
    names: np.ndarray
    tpose_positions: np.ndarray
    offsets: torch.Tensor

    @classmethod
    def build(cls, skeleton: Skeleton, provider, share_joints=True, keyword_table=None):
        tpose = compute_tpose(skeleton)
        if not tpose.root_height > 0:
            raise ZeroRootHeight(f"skeleton {skeleton.name!r} has a zero T-pose root height")
        grouping = classify_joints(skeleton, keyword_table, share_joints=share_joints)
        names = np.stack([provider.embed(n) for n in skeleton.names])
        rel = tpose.root_relative / tpose.character_height
        offsets = torch.from_numpy(skeleton.offsets / tpose.character_height)
        return cls(skeleton, tpose, grouping, names, rel, offsets)

    @property
    def n_joints(self):
        return self.skeleton.n_joints

    @property
    def parents(self):
        return [int(p) for p in self.skeleton.parents]

    @property
    def root_height(self):
        return self.tpose.root_height

    @property
    def character_height(self):
        return self.tpose.character_height

    def normalize_motion(self, motion: Motion):
        """Return ``(root (T,3), rot6d (T,N,6))`` in model units."""
        check_motion(self.skeleton, motion)
        return motion.root_positions / self.root_height, motion.rotations

    def root_relative_positions(self, motion: Motion) -> np.ndarray:
        """FK positions minus the root position, in character-height units."""
        from .skeleton import forward_kinematics

        pos = forward_kinematics(self.skeleton, motion)
        return (pos - pos[:, :1]) / self.character_height


@dataclass(eq=False)
class SkeletonBatch:
    """Padded per-sample skeleton data for a batch."""

    contexts: list
    groups: GroupBatch
    names: torch.Tensor
    tpose: torch.Tensor
    root_heights: torch.Tensor

    @classmethod
    def build(cls, contexts: Sequence[SkeletonContext], extra_padding=0, dtype=torch.float32):
        contexts = list(contexts)
        groups = GroupBatch.build([c.grouping for c in contexts], extra_padding)
        n_max = max(c.n_joints for c in contexts)
        dim = contexts[0].names.shape[1]
        names = np.zeros((len(contexts), n_max, dim))
        tpose = np.zeros((len(contexts), n_max, 3))
        for k, c in enumerate(contexts):
            names[k, : c.n_joints] = c.names
            tpose[k, : c.n_joints] = c.tpose_positions
        heights = torch.tensor([c.root_height for c in contexts], dtype=dtype)
        return cls(contexts, groups, torch.from_numpy(names).to(dtype), torch.from_numpy(tpose).to(dtype), heights)

    @property
    def batch_size(self):
        return len(self.contexts)

    @property
    def n_max(self):
        return self.groups.joint_mask.shape[1]

    def to(self, dtype):
        return SkeletonBatch(self.contexts, self.groups, self.names.to(dtype), self.tpose.to(dtype), self.root_heights.to(dtype))

    def unique(self):
        """Map each distinct context to the batch positions using it."""
        seen = {}
        for k, c in enumerate(self.contexts):
            seen.setdefault(id(c), (c, []))[1].append(k)
        return list(seen.values())


@dataclass(eq=False)
class MotionBatch:
    """Model-unit motion tensors: ``root`` (T,B,3), ``rot6d`` (T,B,Nmax,6)."""

    skeletons: SkeletonBatch
    root: torch.Tensor
    rot6d: torch.Tensor
    fps: float = 30.0
    positions: Optional[torch.Tensor] = None

    @classmethod
    def from_motions(cls, contexts, motions, extra_padding=0, dtype=torch.float32, skeletons=None):
        contexts = list(contexts)
        skeletons = skeletons or SkeletonBatch.build(contexts, extra_padding, dtype)
        t = motions[0].frame_count
        n_max = skeletons.n_max
        root = np.zeros((t, len(motions), 3))
        rot = np.broadcast_to(identity6d(), (t, len(motions), n_max, 6)).copy()
        pos = np.zeros((t, len(motions), n_max, 3))
        for k, (c, m) in enumerate(zip(contexts, motions)):
            if m.frame_count != t:
                raise ValueError("all motions in a batch need the same frame count")
            r, q = c.normalize_motion(m)
            root[:, k] = r
            rot[:, k, : c.n_joints] = q
            pos[:, k, : c.n_joints] = c.root_relative_positions(m)
        as_t = lambda a: torch.from_numpy(a).to(dtype)
        return cls(skeletons, as_t(root), as_t(rot), motions[0].fps, as_t(pos))

    def root_relative_positions(self):
        if self.positions is not None:
            return self.positions
        t, b, n_max, _ = self.rot6d.shape
        out = torch.zeros(t, b, n_max, 3, dtype=self.rot6d.dtype)
        for ctx, idx in self.skeletons.unique():
            n = ctx.n_joints
            sel = torch.tensor(idx, dtype=torch.long)
            pos = kinematics.forward_kinematics(ctx.parents, ctx.offsets.to(self.rot6d.dtype), self.rot6d[:, sel, :n])
            if n < n_max:
                pos = torch.nn.functional.pad(pos, (0, 0, 0, n_max - n))
            out = out.index_copy(1, sel, pos)
        return out

    def root_velocity(self):
        vel = (self.root[1:] - self.root[:-1]) * self.fps
        return torch.cat([torch.zeros_like(self.root[:1]), vel], dim=0)

    def raw_features(self, use_positions=True):
        """Root features ``(T,B,12)`` and per-joint features ``(T,B,Nmax,9)``.

        Root: position, 6D rotation, velocity. Other joints: root-relative
        position and local 6D rotation (index 0 of the joint tensor is unused).
        """
        root = torch.cat([self.root, self.rot6d[:, :, 0], self.root_velocity()], dim=-1)
        pos = self.root_relative_positions()
        if not use_positions:
            pos = torch.zeros_like(pos)
        joints = torch.cat([pos, self.rot6d], dim=-1)
        return root, joints
