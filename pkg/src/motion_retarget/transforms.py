"""Topology edits used for dataset preparation.

All functions take and return ``(Skeleton, Motion)`` pairs and keep joints in
topological order.
"""
from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidRatio, NotAChain, RootEliminated
from .rotations import identity6d, matrix_to_rotation6d, rotation6d_to_matrix
from .skeleton import JointSpec, Motion, Skeleton, check_motion

DEFAULT_FINGER_IDENTIFIERS = ("finger", "thumb", "index", "middle", "ring", "pinky")


def _subset(skeleton, motion, keep):
    keep = sorted(keep)
    remap = {old: new for new, old in enumerate(keep)}
    joints = []
    for old in keep:
        j = skeleton.joints[old]
        parent = None if j.parent is None else remap[j.parent]
        joints.append(JointSpec(j.name, parent, j.offset))
    sk = Skeleton(tuple(joints), skeleton.name)
    mo = Motion(motion.root_positions, motion.rotations[:, keep], motion.fps)
    return sk, mo


def eliminate_joints_by_identifier(
    skeleton: Skeleton,
    motion: Motion,
    identifiers: Sequence[str] = DEFAULT_FINGER_IDENTIFIERS,
    keep_patterns: Optional[Iterable[str]] = None,
):
    """Drop every joint whose lowercased name contains one of ``identifiers``.

    Subtrees of dropped joints go with them. With ``keep_patterns``, joints
    matching none of the patterns are dropped as well.
    """
    check_motion(skeleton, motion)
    identifiers = [s.lower() for s in identifiers]
    if not identifiers:
        raise ValueError("identifiers must be non-empty")
    keep_patterns = None if keep_patterns is None else [s.lower() for s in keep_patterns]

    def dropped(name):
        low = name.lower()
        if any(s in low for s in identifiers):
            return True
        return keep_patterns is not None and not any(s in low for s in keep_patterns)

    if dropped(skeleton.joints[0].name):
        raise RootEliminated(f"root joint {skeleton.joints[0].name!r} matches an elimination rule")
    removed = set()
    for i, j in enumerate(skeleton.joints):
        if i and (j.parent in removed or dropped(j.name)):
            removed.add(i)
    if not removed:
        return skeleton, motion
    return _subset(skeleton, motion, [i for i in range(skeleton.n_joints) if i not in removed])


def _unique_name(skeleton, base):
    names = set(skeleton.names)
    name, k = base, 1
    while name in names:
        k += 1
        name = f"{base}{k}"
    return name


def split_joint(skeleton: Skeleton, motion: Motion, joint: int, ratio: float = 0.5, name=None):
    """Insert an identity-rotation joint part-way along the bone ending at ``joint``.

    The new joint takes ``ratio`` of the bone and sits at index ``joint``; the
    original joint moves to ``joint + 1``. FK of pre-existing joints is unchanged.
    """
    check_motion(skeleton, motion)
    if not 0.0 < ratio < 1.0:
        raise InvalidRatio(f"split ratio must lie in (0, 1), got {ratio}")
    if not 0 < joint < skeleton.n_joints:
        raise ValueError(f"cannot split joint {joint}: must be a non-root joint index")
    target = skeleton.joints[joint]
    name = name or _unique_name(skeleton, f"{target.name}_split")

    def shift(p):
        return None if p is None else (p + 1 if p >= joint else p)

    joints = [JointSpec(j.name, shift(j.parent), j.offset) for j in skeleton.joints]
    inserted = JointSpec(name, target.parent, ratio * target.offset)
    moved = JointSpec(target.name, joint, (1.0 - ratio) * target.offset)
    joints[joint] = moved
    joints.insert(joint, inserted)
    rot = np.concatenate(
        [
            motion.rotations[:, :joint],
            identity6d((motion.frame_count, 1)),
            motion.rotations[:, joint:],
        ],
        axis=1,
    )
    return Skeleton(tuple(joints), skeleton.name), Motion(motion.root_positions, rot, motion.fps)


def merge_joint_chain(skeleton: Skeleton, motion: Motion, chain: Sequence[int]):
    """Collapse a parent-to-child chain onto its last joint.

    The survivor's offset is the plain sum of the chain offsets and its rotation
    is the product of the chain rotations in parent-to-child order.
    """
    check_motion(skeleton, motion)
    chain = [int(c) for c in chain]
    if not chain:
        raise NotAChain("chain is empty")
    if chain[0] == 0:
        raise NotAChain("chain may not contain the root")
    for a, b in zip(chain, chain[1:]):
        if skeleton.joints[b].parent != a:
            raise NotAChain(f"joint {b} is not a child of {a}")
        if skeleton.children(a) != [b]:
            raise NotAChain(f"joint {a} has side branches inside the chain")
    if len(chain) == 1:
        return skeleton, motion
    last = chain[-1]
    mats = rotation6d_to_matrix(motion.rotations[:, chain])
    merged = mats[:, 0]
    for k in range(1, len(chain)):
        merged = merged @ mats[:, k]
    rot = motion.rotations.copy()
    rot[:, last] = matrix_to_rotation6d(merged)
    offset = skeleton.offsets[chain].sum(axis=0)
    joints = list(skeleton.joints)
    joints[last] = JointSpec(joints[last].name, skeleton.joints[chain[0]].parent, offset)
    sk = Skeleton(tuple(joints), skeleton.name)
    return _subset(sk, Motion(motion.root_positions, rot, motion.fps), [i for i in range(len(joints)) if i not in chain[:-1]])


def window_motion(motion: Motion, length: int, stride: int):
    """Overlapping windows with the root re-expressed relative to frame 0 in x and z."""
    if length < 1 or stride < 1:
        raise ValueError("length and stride must be >= 1")
    windows = []
    for start in range(0, motion.frame_count - length + 1, stride):
        w = motion.slice(start, start + length)
        root = w.root_positions.copy()
        root[:, [0, 2]] -= root[0, [0, 2]]
        windows.append(Motion(root, w.rotations, w.fps))
    return windows
