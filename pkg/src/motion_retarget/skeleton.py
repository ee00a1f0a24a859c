"""Skeleton and motion value types, forward kinematics and metrics.

Conventions: Y-up, right-handed, lengths in file units, double precision.
Joints are stored in topological order, so the root is always index 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidMotion, InvalidSkeleton, ZeroHeight
from .rotations import identity6d, rotation6d_to_matrix


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class JointSpec:
    name: str
    parent: Optional[int]
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        offset = _frozen(self.offset)
        if offset.shape != (3,):
            raise InvalidSkeleton(f"joint {self.name!r}: offset must be a 3-vector")
        if not np.all(np.isfinite(offset)):
            raise InvalidSkeleton(f"joint {self.name!r}: offset is not finite")
        object.__setattr__(self, "offset", offset)

    def __eq__(self, other):
        if not isinstance(other, JointSpec):
            return NotImplemented
        return (
            self.name == other.name
            and self.parent == other.parent
            and np.array_equal(self.offset, other.offset)
        )

    def __hash__(self):
        return hash((self.name, self.parent, self.offset.tobytes()))


@dataclass(frozen=True, eq=False)
class Skeleton:
    """Immutable joint hierarchy.

    Invariants checked at construction: a single root at index 0, every
    parent index smaller than the child index, unique joint names.
    """

    joints: tuple
    name: str = "skeleton"

    def __post_init__(self):
        joints = tuple(self.joints)
        object.__setattr__(self, "joints", joints)
        if not joints:
            raise InvalidSkeleton("skeleton has no joints")
        roots = [i for i, j in enumerate(joints) if j.parent is None]
        if roots != [0]:
            raise InvalidSkeleton(f"expected exactly one root at index 0, found roots at {roots}")
        for i, j in enumerate(joints[1:], start=1):
            if not 0 <= j.parent < i:
                raise InvalidSkeleton(
                    f"joint {i} ({j.name!r}) has parent {j.parent}; parents must precede children"
                )
        names = [j.name for j in joints]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise InvalidSkeleton(f"duplicate joint names: {dup}")
        object.__setattr__(self, "_parents", _frozen([-1] + [j.parent for j in joints[1:]], np.int64))
        object.__setattr__(self, "_offsets", _frozen([j.offset for j in joints]))

    root_index = 0

    @classmethod
    def from_arrays(cls, names, parents, offsets, name="skeleton"):
        joints = [
            JointSpec(str(n), None if p is None or p < 0 else int(p), np.asarray(o, dtype=np.float64))
            for n, p, o in zip(names, parents, offsets)
        ]
        return cls(tuple(joints), name)

    def __len__(self):
        return len(self.joints)

    @property
    def n_joints(self):
        return len(self.joints)

    @property
    def names(self):
        return [j.name for j in self.joints]

    @property
    def parents(self):
        return self._parents

    @property
    def offsets(self):
        return self._offsets

    def index(self, name):
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(name)

    def children(self, i):
        return [k for k, j in enumerate(self.joints) if j.parent == i]

    def depth(self, i):
        d = 0
        while self.joints[i].parent is not None:
            i = self.joints[i].parent
            d += 1
        return d

    def path_to_root(self, i):
        path = [i]
        while self.joints[i].parent is not None:
            i = self.joints[i].parent
            path.append(i)
        return path[::-1]

    def topology_key(self):
        return tuple(int(p) for p in self._parents)

    def __eq__(self, other):
        if not isinstance(other, Skeleton):
            return NotImplemented
        return self.name == other.name and self.joints == other.joints

    def __hash__(self):
        return hash((self.name, self.joints))

    def __repr__(self):
        return f"Skeleton(name={self.name!r}, n_joints={self.n_joints})"


@dataclass(frozen=True, eq=False)
class Motion:
    """Root trajectory plus local 6D joint rotations for ``T`` frames."""

    root_positions: np.ndarray
    rotations: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        root = _frozen(self.root_positions)
        rot = _frozen(self.rotations)
        if root.ndim != 2 or root.shape[1] != 3:
            raise InvalidMotion(f"root_positions must be (T, 3), got {root.shape}")
        if rot.ndim != 3 or rot.shape[2] != 6:
            raise InvalidMotion(f"rotations must be (T, N, 6), got {rot.shape}")
        if rot.shape[0] != root.shape[0]:
            raise InvalidMotion(f"frame counts differ: {root.shape[0]} root vs {rot.shape[0]} rotation")
        if not (np.all(np.isfinite(root)) and np.all(np.isfinite(rot))):
            raise InvalidMotion("motion contains non-finite values")
        if not self.fps > 0:
            raise InvalidMotion(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "root_positions", root)
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def frame_count(self):
        return self.root_positions.shape[0]

    @property
    def n_joints(self):
        return self.rotations.shape[1]

    def __len__(self):
        return self.frame_count

    def slice(self, start, stop):
        return Motion(self.root_positions[start:stop], self.rotations[start:stop], self.fps)

    def allclose(self, other, atol=1e-9):
        return (
            self.rotations.shape == other.rotations.shape
            and np.allclose(self.root_positions, other.root_positions, atol=atol)
            and np.allclose(self.rotations, other.rotations, atol=atol)
        )

    @classmethod
    def identity(cls, frames, n_joints, root_positions=None, fps=30.0):
        if root_positions is None:
            root_positions = np.zeros((frames, 3))
        return cls(np.broadcast_to(root_positions, (frames, 3)), identity6d((frames, n_joints)), fps)


@dataclass(frozen=True, eq=False)
class TPose:
    global_positions: np.ndarray
    root_height: float
    character_height: float

    @property
    def root_relative(self):
        return self.global_positions - self.global_positions[0]


def check_motion(skeleton: Skeleton, motion: Motion):
    if motion.n_joints != skeleton.n_joints:
        raise InvalidMotion(
            f"motion has {motion.n_joints} joints but skeleton {skeleton.name!r} has {skeleton.n_joints}"
        )


def _fk_arrays(parents, offsets, root_positions, rotmats):
    t, n = rotmats.shape[:2]
    glob_r = np.empty_like(rotmats)
    glob_p = np.empty((t, n, 3))
    glob_r[:, 0] = rotmats[:, 0]
    glob_p[:, 0] = root_positions
    for j in range(1, n):
        p = parents[j]
        glob_r[:, j] = glob_r[:, p] @ rotmats[:, j]
        glob_p[:, j] = glob_p[:, p] + glob_r[:, p] @ offsets[j]
    return glob_p, glob_r


def forward_kinematics(skeleton: Skeleton, motion: Motion, return_rotations=False):
    """Global joint positions ``(T, N, 3)`` for a motion on a skeleton."""
    check_motion(skeleton, motion)
    rotmats = rotation6d_to_matrix(motion.rotations)
    pos, rot = _fk_arrays(skeleton.parents, skeleton.offsets, motion.root_positions, rotmats)
    return (pos, rot) if return_rotations else pos


def compute_tpose(skeleton: Skeleton) -> TPose:
    """T-pose with the lowest joint placed on the ground plane ``y = 0``."""
    n = skeleton.n_joints
    rest = np.broadcast_to(np.eye(3), (1, n, 3, 3))
    pos, _ = _fk_arrays(skeleton.parents, skeleton.offsets, np.zeros((1, 3)), rest)
    pos = pos[0]
    min_y = pos[:, 1].min()
    pos = pos - np.array([0.0, min_y, 0.0])
    height = float(pos[:, 1].max() - pos[:, 1].min())
    if not height > 0:
        raise InvalidSkeleton(f"skeleton {skeleton.name!r} has zero vertical extent")
    return TPose(_frozen(pos), float(pos[0, 1]), height)


def root_velocity(motion: Motion) -> np.ndarray:
    """Backward-difference root velocity in units per second; frame 0 is zero."""
    vel = np.zeros_like(motion.root_positions)
    vel[1:] = np.diff(motion.root_positions, axis=0) * motion.fps
    return vel


def height_normalized_mse(pred, gt, character_height) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if not character_height > 0:
        raise ZeroHeight(f"character height must be positive, got {character_height}")
    return float(np.mean(((pred - gt) / character_height) ** 2))


def make_chain(offsets: Sequence, names=None, name="chain") -> Skeleton:
    """Single kinematic chain, mostly useful for tests and examples."""
    offsets = np.asarray(offsets, dtype=np.float64)
    names = names or [f"joint{i}" for i in range(len(offsets))]
    parents = [-1] + list(range(len(offsets) - 1))
    return Skeleton.from_arrays(names, parents, offsets, name=name)
