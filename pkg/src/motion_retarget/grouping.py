"""Six-part joint grouping with shared joints, plus padded gather/scatter.

Joints are classified by lowercase keyword match on their names (limb
keywords need a side token), falling back to the parent's group. With sharing
enabled the hip joint is prepended to both leg groups and the uppermost spine
joint to both arm groups and the head group.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from .errors import UnclassifiableRoot
from .skeleton import Skeleton

GROUP_NAMES = ("torso", "left_leg", "right_leg", "left_arm", "right_arm", "head")
TORSO, LEFT_LEG, RIGHT_LEG, LEFT_ARM, RIGHT_ARM, HEAD = range(6)
# shared joints resolve to the first owning group in this order when decoding
DECODE_PRECEDENCE = (TORSO, LEFT_LEG, RIGHT_LEG, LEFT_ARM, RIGHT_ARM, HEAD)

DEFAULT_KEYWORDS = {
    "torso": ["hip", "pelvis", "spine", "chest", "torso", "root"],
    "leg": ["leg", "thigh", "knee", "shin", "calf", "foot", "ankle", "toe"],
    "arm": ["shoulder", "clavicle", "arm", "elbow", "forearm", "hand", "wrist", "armour", "pauldron"],
    "head": ["neck", "head", "hair", "face", "jaw", "eye"],
    "left": [r"(?i)left", r"^[lL][_.\- ]", r"^l(?=[A-Z])", r"(?i)[_.\- ]l$"],
    "right": [r"(?i)right", r"^[rR][_.\- ]", r"^r(?=[A-Z])", r"(?i)[_.\- ]r$"],
}

KEYWORD_SCHEMA = {
    "type": "object",
    "properties": {
        key: {"type": "array", "items": {"type": "string"}}
        for key in ("torso", "leg", "arm", "head", "left", "right")
    },
    "additionalProperties": False,
}


def load_keyword_table(path) -> dict:
    """Read a keyword table from JSON; missing keys fall back to the defaults."""
    import jsonschema

    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    jsonschema.validate(data, KEYWORD_SCHEMA)
    table = {k: list(v) for k, v in DEFAULT_KEYWORDS.items()}
    table.update(data)
    return table


@dataclass(frozen=True)
class PartGrouping:
    groups: tuple
    shared: tuple
    n_joints: int
    share_joints: bool = True

    @property
    def sizes(self):
        return tuple(len(g) for g in self.groups)

    def group_of(self, joint):
        return [i for i, g in enumerate(self.groups) if joint in g]

    def mask(self, group, padded_size):
        m = np.zeros(padded_size, dtype=bool)
        m[: len(self.groups[group])] = True
        return m

    def decode_source(self):
        """(group, slot) pair that supplies each joint when scattering back."""
        src = {}
        for g in DECODE_PRECEDENCE:
            for slot, j in enumerate(self.groups[g]):
                src.setdefault(j, (g, slot))
        return [src[j] for j in range(self.n_joints)]


def _side(name, table):
    left = any(re.search(p, name) for p in table["left"])
    right = any(re.search(p, name) for p in table["right"])
    if left and not right:
        return "left"
    if right and not left:
        return "right"
    return None


def _keyword_group(name, table):
    low = name.lower()
    side = _side(name, table)
    if any(k in low for k in table["arm"]) and side:
        return LEFT_ARM if side == "left" else RIGHT_ARM
    if any(k in low for k in table["leg"]) and side:
        return LEFT_LEG if side == "left" else RIGHT_LEG
    if any(k in low for k in table["head"]):
        return HEAD
    if any(k in low for k in table["torso"]):
        return TORSO
    return None


def classify_joints(
    skeleton: Skeleton,
    keyword_table: Optional[dict] = None,
    share_joints: bool = True,
    root_fallback: bool = True,
) -> PartGrouping:
    table = DEFAULT_KEYWORDS if keyword_table is None else keyword_table
    root_name = skeleton.joints[0].name
    if not root_fallback and _keyword_group(root_name, table) != TORSO:
        raise UnclassifiableRoot(f"root joint {root_name!r} matches no torso keyword")
    label = [TORSO]
    for i in range(1, skeleton.n_joints):
        parent_label = label[skeleton.joints[i].parent]
        g = _keyword_group(skeleton.joints[i].name, table)
        # the torso is a connected chain from the root
        if g is None or (g == TORSO and parent_label != TORSO):
            g = parent_label
        label.append(g)
    members = [[j for j in range(skeleton.n_joints) if label[j] == g] for g in range(6)]
    shared = []
    if share_joints:
        for g in (LEFT_LEG, RIGHT_LEG):
            if members[g]:
                hip = skeleton.joints[members[g][0]].parent
                if hip is not None and label[hip] == TORSO:
                    members[g].insert(0, hip)
                    shared.append((hip, (TORSO, g)))
        spine = uppermost_spine(skeleton, label)
        for g in (LEFT_ARM, RIGHT_ARM, HEAD):
            if members[g]:
                members[g].insert(0, spine)
                shared.append((spine, (TORSO, g)))
    return PartGrouping(tuple(tuple(m) for m in members), tuple(shared), skeleton.n_joints, share_joints)


def uppermost_spine(skeleton: Skeleton, grouping) -> int:
    """Last torso joint on the path from the root towards the neck.

    ``grouping`` may be a PartGrouping or a per-joint group label list.
    """
    if isinstance(grouping, PartGrouping):
        label = [TORSO] * skeleton.n_joints
        for g in (LEFT_LEG, RIGHT_LEG, LEFT_ARM, RIGHT_ARM, HEAD):
            for j in grouping.groups[g]:
                if j not in dict(grouping.shared):
                    label[j] = g
    else:
        label = list(grouping)
    torso = [j for j in range(skeleton.n_joints) if label[j] == TORSO]
    candidates = []
    for g in (HEAD, LEFT_ARM, RIGHT_ARM):
        tops = [j for j in range(skeleton.n_joints) if label[j] == g]
        if not tops:
            continue
        last = None
        for j in skeleton.path_to_root(tops[0]):
            if label[j] != TORSO:
                break
            last = j
        if last is not None:
            candidates.append(last)
        if g == HEAD and candidates:
            break
    pool = candidates or torso
    return max(pool, key=lambda j: (skeleton.depth(j), j))


@dataclass
class GroupBatch:
    """Padded index tables for a batch of (possibly different) skeletons."""

    sizes: tuple
    index: list
    mask: list
    source: torch.Tensor
    joint_mask: torch.Tensor
    n_joints: tuple

    @classmethod
    def build(cls, groupings: Sequence[PartGrouping], extra_padding: int = 0):
        b = len(groupings)
        sizes = tuple(max(len(gr.groups[g]) for gr in groupings) + extra_padding for g in range(6))
        index, mask = [], []
        for g, size in enumerate(sizes):
            idx = torch.zeros(b, size, dtype=torch.long)
            m = torch.zeros(b, size, dtype=torch.bool)
            for k, gr in enumerate(groupings):
                members = gr.groups[g]
                idx[k, : len(members)] = torch.tensor(members, dtype=torch.long)
                m[k, : len(members)] = True
            index.append(idx)
            mask.append(m)
        n_max = max(gr.n_joints for gr in groupings)
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        source = torch.zeros(b, n_max, dtype=torch.long)
        joint_mask = torch.zeros(b, n_max, dtype=torch.bool)
        for k, gr in enumerate(groupings):
            for j, (g, slot) in enumerate(gr.decode_source()):
                source[k, j] = int(starts[g] + slot)
            joint_mask[k, : gr.n_joints] = True
        return cls(sizes, index, mask, source, joint_mask, tuple(gr.n_joints for gr in groupings))

    @property
    def total_slots(self):
        return sum(self.sizes)

    def flat_mask(self):
        return torch.cat(self.mask, dim=1)


def gather_padded(features: torch.Tensor, batch: GroupBatch):
    """Split ``(T, B, N, d)`` joint features into six zero-padded group tensors."""
    t, b, _, d = features.shape
    out = []
    for idx, m in zip(batch.index, batch.mask):
        gathered = torch.gather(features, 2, idx.view(1, b, -1, 1).expand(t, b, idx.shape[1], d))
        out.append(gathered * m.view(1, b, -1, 1).to(features.dtype))
    return out, batch.mask


def scatter_unpad(group_tensors, batch: GroupBatch):
    """Inverse of :func:`gather_padded`; shared joints take the torso copy."""
    flat = torch.cat(list(group_tensors), dim=2)
    t, b, _, d = flat.shape
    src = batch.source
    out = torch.gather(flat, 2, src.view(1, b, -1, 1).expand(t, b, src.shape[1], d))
    return out * batch.joint_mask.view(1, b, -1, 1).to(flat.dtype)
