"""Procedural humanoids, motions and evaluation splits.

Skeletons face +z with y up; arms point along +-x and legs along -y in the
rest pose. Motions are driven by joint role (body part and position along
its chain), so the same ``(kind, seed)`` pair produces the semantically same
motion on any generated character.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .bvh import BvhDocument, write_bvh
from .errors import InsufficientData
from .grouping import HEAD, LEFT_ARM, LEFT_LEG, RIGHT_ARM, RIGHT_LEG, TORSO, classify_joints
from .rotations import matrix_to_rotation6d
from .skeleton import Motion, Skeleton, forward_kinematics
from .transforms import merge_joint_chain, split_joint

STYLES = ("mixamo", "snake", "abbrev")
MOTION_KINDS = ("walk", "wave", "squat", "composite")
SPLIT_TAGS = ("sc+sm", "sc+um", "uc+sm", "uc+um")
MANIFEST_FORMAT = "motion_retarget.synth/1"


@dataclass(frozen=True)
class HumanoidParams:
    """Bone-length ranges (cm-like units) for :func:`generate_humanoid`."""

    thigh: tuple = (38.0, 50.0)
    shin: tuple = (36.0, 48.0)
    foot: tuple = (6.0, 10.0)
    toe: tuple = (10.0, 15.0)
    hip_width: tuple = (8.0, 12.0)
    spine_count: tuple = (2, 4)
    spine: tuple = (8.0, 14.0)
    neck: tuple = (6.0, 10.0)
    head: tuple = (8.0, 12.0)
    shoulder: tuple = (4.0, 8.0)
    upper_arm: tuple = (24.0, 32.0)
    forearm: tuple = (22.0, 28.0)
    hand: tuple = (8.0, 10.0)

    def __post_init__(self):
        for name, (lo, hi) in asdict(self).items():
            if name == "spine_count":
                if not 1 <= lo <= hi:
                    raise ValueError("spine_count range must satisfy 1 <= lo <= hi")
            elif not 0 < lo <= hi:
                raise ValueError(f"{name} range must be positive and ordered, got {(lo, hi)}")


def _names(style, n_spine):
    """Role -> joint name for a naming style."""
    if style == "mixamo":
        spine = ["Spine"] + [f"Spine{i}" for i in range(1, n_spine)]
        side = {"l": "Left", "r": "Right"}
        limb = lambda s, part: f"{side[s]}{part}"
        base = {"hips": "Hips", "neck": "Neck", "head": "Head"}
        parts = {"shoulder": "Shoulder", "arm": "Arm", "forearm": "ForeArm", "hand": "Hand",
                 "upleg": "UpLeg", "leg": "Leg", "foot": "Foot", "toe": "ToeBase"}
    elif style == "snake":
        spine = [f"spine_{i + 1:02d}" for i in range(n_spine)]
        side = {"l": "left", "r": "right"}
        limb = lambda s, part: f"{side[s]}_{part}"
        base = {"hips": "hips", "neck": "neck", "head": "head"}
        parts = {"shoulder": "shoulder", "arm": "arm", "forearm": "forearm", "hand": "hand",
                 "upleg": "up_leg", "leg": "leg", "foot": "foot", "toe": "toe_base"}
    elif style == "abbrev":
        spine = [f"Spine{i + 1}" for i in range(n_spine)]
        side = {"l": "L", "r": "R"}
        limb = lambda s, part: f"{side[s]}_{part}"
        base = {"hips": "Hips", "neck": "Neck", "head": "Head"}
        parts = {"shoulder": "Shoulder", "arm": "Arm", "forearm": "ForeArm", "hand": "Hand",
                 "upleg": "UpLeg", "leg": "Leg", "foot": "Foot", "toe": "Toe"}
    else:
        raise ValueError(f"unknown naming style {style!r}; expected one of {STYLES}")
    names = dict(base, spine=spine)
    for s in "lr":
        for role, part in parts.items():
            names[f"{s}_{role}"] = limb(s, part)
    return names


def generate_humanoid(params: HumanoidParams = None, style="mixamo", seed=0, name=None) -> Skeleton:
    """A 24-26 joint humanoid: hips, 2-4 spine joints, neck, head, 4-joint limbs with end sites."""
    params = params or HumanoidParams()
    rng = np.random.default_rng([seed, 7919])
    u = lambda r: float(rng.uniform(*r))
    n_spine = int(rng.integers(params.spine_count[0], params.spine_count[1] + 1))
    nm = _names(style, n_spine)
    names, parents, offsets = [], [], []

    def add(joint_name, parent, offset):
        names.append(joint_name)
        parents.append(parent)
        offsets.append(offset)
        return len(names) - 1

    thigh, shin, foot, toe = u(params.thigh), u(params.shin), u(params.foot), u(params.toe)
    hip_w = u(params.hip_width)
    hips = add(nm["hips"], -1, (0.0, thigh + shin + foot, 0.0))
    spine_len = u(params.spine)
    parent = hips
    for s in nm["spine"]:
        parent = add(s, parent, (0.0, spine_len, 0.0))
    chest = parent
    neck = add(nm["neck"], chest, (0.0, u(params.neck), 0.0))
    add(nm["head"], neck, (0.0, u(params.head), 0.0))
    arm_lengths = [u(params.shoulder), u(params.upper_arm), u(params.forearm), u(params.hand)]
    for s, sign in (("l", 1.0), ("r", -1.0)):
        sh = add(nm[f"{s}_shoulder"], chest, (sign * arm_lengths[0], 0.6 * spine_len, 0.0))
        ar = add(nm[f"{s}_arm"], sh, (sign * 0.5 * arm_lengths[0] + sign * 4.0, 0.0, 0.0))
        fa = add(nm[f"{s}_forearm"], ar, (sign * arm_lengths[1], 0.0, 0.0))
        ha = add(nm[f"{s}_hand"], fa, (sign * arm_lengths[2], 0.0, 0.0))
        add(f"{nm[f'{s}_hand']}_End", ha, (sign * arm_lengths[3], 0.0, 0.0))
    for s, sign in (("l", 1.0), ("r", -1.0)):
        up = add(nm[f"{s}_upleg"], hips, (sign * hip_w, -4.0, 0.0))
        lg = add(nm[f"{s}_leg"], up, (0.0, -(thigh - 4.0), 0.0))
        ft = add(nm[f"{s}_foot"], lg, (0.0, -shin, 0.0))
        tb = add(nm[f"{s}_toe"], ft, (0.0, -foot, 0.6 * toe))
        add(f"{nm[f'{s}_toe']}_End", tb, (0.0, 0.0, 0.4 * toe))
    return Skeleton.from_arrays(names, parents, offsets, name=name or f"{style}_{seed}")


# -- motions --------------------------------------------------------------

def joint_roles(skeleton: Skeleton):
    """(group, index along the group's chain) per joint, from keyword grouping."""
    grouping = classify_joints(skeleton, share_joints=False)
    roles = [None] * skeleton.n_joints
    for g, members in enumerate(grouping.groups):
        if not members:
            continue
        base = min(skeleton.depth(j) for j in members)
        for j in members:
            roles[j] = (g, skeleton.depth(j) - base)
    return roles


@dataclass(frozen=True)
class MotionParams:
    kind: str
    freq: float
    phase: float
    hip_amp: float
    knee_amp: float
    arm_swing: float
    arm_lower: float
    spine_amp: float
    speed: float
    bob: float
    wave_amp: float
    squat_depth: float


def motion_params(kind: str, seed: int) -> MotionParams:
    """Parameters drawn from ``(kind, seed)`` only, independent of the skeleton."""
    if kind not in MOTION_KINDS:
        raise ValueError(f"unknown motion kind {kind!r}; expected one of {MOTION_KINDS}")
    rng = np.random.default_rng([MOTION_KINDS.index(kind), seed, 104729])
    u = lambda a, b: float(rng.uniform(a, b))
    return MotionParams(
        kind=kind,
        freq=u(0.7, 1.2),
        phase=u(0.0, 2 * np.pi),
        hip_amp=u(0.35, 0.6),
        knee_amp=u(0.5, 0.9),
        arm_swing=u(0.3, 0.6),
        arm_lower=u(1.0, 1.3),
        spine_amp=u(0.05, 0.15),
        speed=u(0.8, 1.4),
        bob=u(0.01, 0.03),
        wave_amp=u(0.4, 0.8),
        squat_depth=u(0.2, 0.35),
    )


def _limb_angles(p: MotionParams, g, k, phi, spine_count):
    """Euler angles (x, y, z) in radians for one joint role, per frame."""
    zeros = np.zeros_like(phi)
    ax, ay, az = zeros.copy(), zeros.copy(), zeros.copy()
    walking = p.kind in ("walk", "composite")
    if g in (LEFT_LEG, RIGHT_LEG):
        sign = 1.0 if g == LEFT_LEG else -1.0
        if walking:
            if k == 0:
                ax = -p.hip_amp * sign * np.sin(phi)
            elif k == 1:
                ax = p.knee_amp * 0.5 * (1.0 - np.cos(phi + sign * np.pi / 2 + np.pi / 2))
            elif k == 2:
                ax = -0.2 * sign * np.sin(phi + 0.5)
        elif p.kind == "squat":
            bend = 0.5 * (1.0 - np.cos(phi))
            depth = p.squat_depth * 3.0
            if k == 0:
                ax = -depth * bend
            elif k == 1:
                ax = 2.0 * depth * bend
            elif k == 2:
                ax = -depth * bend
        else:
            if k == 0:
                az = 0.05 * sign * np.sin(phi)
    elif g in (LEFT_ARM, RIGHT_ARM):
        sign = 1.0 if g == LEFT_ARM else -1.0
        if k == 1:
            az = -sign * p.arm_lower + zeros
        waving = p.kind in ("wave", "composite") and g == RIGHT_ARM
        if waving:
            if k == 1:
                az = -sign * (-0.9 + 0.2 * np.sin(0.5 * phi))
            elif k == 2:
                az = -sign * (1.0 + p.wave_amp * np.sin(2.0 * phi))
            elif k == 3:
                ax = 0.3 * np.sin(2.0 * phi)
        elif walking:
            if k == 1:
                ay = p.arm_swing * sign * np.sin(phi)
            elif k == 2:
                ay = -0.3 * (0.5 + 0.5 * np.sin(phi + sign * np.pi / 2))
        elif p.kind == "squat":
            if k == 1:
                ay = -0.8 * 0.5 * (1.0 - np.cos(phi)) * sign
    elif g == TORSO and k >= 1:
        share = 1.0 / max(spine_count, 1)
        ay = p.spine_amp * np.sin(phi) * share
        if p.kind == "squat":
            ax = 0.4 * 0.5 * (1.0 - np.cos(phi)) * share
    elif g == HEAD:
        if k in (0, 1):
            ax = 0.5 * p.spine_amp * np.sin(2 * phi + 1.0)
    return ax, ay, az


def generate_motion(skeleton: Skeleton, kind="walk", frames=128, seed=0, fps=30.0) -> Motion:
    """Smooth role-driven motion. ``walk`` turns the character to face +x and moves along +x."""
    if frames < 2:
        raise ValueError("frames must be >= 2")
    p = motion_params(kind, seed)
    t = np.arange(frames) / fps
    freq = p.freq * (0.5 if kind == "squat" else 1.0)
    phi = 2 * np.pi * freq * t + p.phase
    roles = joint_roles(skeleton)
    spine_count = sum(1 for r in roles if r and r[0] == TORSO and r[1] >= 1)
    n = skeleton.n_joints
    mats = np.broadcast_to(np.eye(3), (frames, n, 3, 3)).copy()
    for j, role in enumerate(roles):
        if j == 0 or role is None:
            continue
        ax, ay, az = _limb_angles(p, role[0], role[1], phi, spine_count)
        mats[:, j] = Rotation.from_euler("ZYX", np.stack([az, ay, ax], axis=-1)).as_matrix()
    from .skeleton import compute_tpose

    root_height = compute_tpose(skeleton).root_height
    root = np.zeros((frames, 3))
    yaw = np.zeros(frames)
    pitch = np.zeros(frames)
    if kind in ("walk", "composite"):
        yaw[:] = np.pi / 2
        root[:, 0] = p.speed * t
        root[:, 1] = 1.0 + p.bob * np.sin(2 * phi)
    elif kind == "squat":
        root[:, 1] = 1.0 - p.squat_depth * 0.5 * (1.0 - np.cos(phi))
        pitch = 0.3 * 0.5 * (1.0 - np.cos(phi))
        root[:, 2] = -0.1 * 0.5 * (1.0 - np.cos(phi))
    else:
        root[:, 1] = 1.0
        root[:, 0] = 0.02 * np.sin(phi)
        yaw[:] = 0.1 * np.sin(0.5 * phi)
    mats[:, 0] = Rotation.from_euler("YX", np.stack([yaw, pitch], axis=-1)).as_matrix()
    rot6d = matrix_to_rotation6d(mats)
    return Motion(root * root_height, rot6d, fps)


# -- variants and splits --------------------------------------------------

def paired_variant(skeleton: Skeleton, motion: Motion, transform: Sequence[dict], name=None):
    """Apply split/merge ops (by joint name) and return the variant with its exact motion.

    Ops: ``{"op": "split", "joint": name, "ratio": r}`` and
    ``{"op": "merge", "chain": [name, ...]}``.
    """
    sk, m = skeleton, motion
    for op in transform:
        if op["op"] == "split":
            sk, m = split_joint(sk, m, sk.index(op["joint"]), op.get("ratio", 0.5), op.get("name"))
        elif op["op"] == "merge":
            sk, m = merge_joint_chain(sk, m, [sk.index(j) for j in op["chain"]])
        else:
            raise ValueError(f"unknown transform op {op['op']!r}")
    if name is not None:
        sk = Skeleton(sk.joints, name)
    return sk, m


def default_split_transform(skeleton: Skeleton, ratio=0.5):
    """Split both forearms and both knees (lower-leg joints)."""
    roles = joint_roles(skeleton)
    ops = []
    for g, k in ((LEFT_ARM, 2), (RIGHT_ARM, 2), (LEFT_LEG, 1), (RIGHT_LEG, 1)):
        for j, r in enumerate(roles):
            if r == (g, k):
                ops.append({"op": "split", "joint": skeleton.names[j], "ratio": ratio})
                break
    return ops


@dataclass
class EvalSplit:
    tag: str
    characters: list
    motions: list

    def to_dict(self):
        return {"characters": list(self.characters), "motions": [list(m) for m in self.motions]}


def make_splits(characters, motions, holdout_characters=0.34, holdout_motions=0.25, seed=0, eval_motions=None):
    """Partition characters and motion kinds into seen/unseen sets.

    ``motions`` are ``(kind, seed)`` clips used for training. ``eval_motions``
    are clips for the "seen motion" evaluation splits; by default these are
    the training clips themselves. Held-out kinds supply the unseen-motion
    clips. Returns ``(train, {tag: EvalSplit})``.
    """
    characters = list(characters)
    motions = [tuple(m) for m in motions]
    kinds = sorted({k for k, _ in motions}, key=lambda k: (MOTION_KINDS.index(k) if k in MOTION_KINDS else 99, k))
    if len(characters) < 2 or len(kinds) < 2:
        raise InsufficientData("need at least 2 characters and 2 motion kinds to hold out unseen sets")
    rng = np.random.default_rng([seed, 31337])
    n_uc = min(max(1, int(round(holdout_characters * len(characters)))), len(characters) - 1)
    n_um = min(max(1, int(round(holdout_motions * len(kinds)))), len(kinds) - 1)
    char_order = [characters[i] for i in rng.permutation(len(characters))]
    kind_order = [kinds[i] for i in rng.permutation(len(kinds))]
    unseen_c, seen_c = sorted(char_order[:n_uc]), sorted(char_order[n_uc:])
    unseen_k = set(kind_order[:n_um])
    seen_m = [m for m in motions if m[0] not in unseen_k]
    unseen_m = [m for m in motions if m[0] in unseen_k]
    sm_eval = [tuple(m) for m in eval_motions] if eval_motions is not None else seen_m
    train = EvalSplit("train", seen_c, seen_m)
    splits = {
        "sc+sm": EvalSplit("sc+sm", seen_c, sm_eval),
        "sc+um": EvalSplit("sc+um", seen_c, unseen_m),
        "uc+sm": EvalSplit("uc+sm", unseen_c, sm_eval),
        "uc+um": EvalSplit("uc+um", unseen_c, unseen_m),
    }
    for tag, s in splits.items():
        if not s.characters or not s.motions:
            raise InsufficientData(f"split {tag} would be empty")
    return train, splits


# -- dataset on disk -------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_characters: int = 6
    styles: tuple = STYLES
    kinds: tuple = MOTION_KINDS
    clips_per_kind: int = 1
    eval_clips_per_kind: int = 0
    frames: int = 128
    fps: float = 30.0
    holdout_characters: float = 0.34
    holdout_motions: float = 0.25
    split_ratio: float = 0.5
    params: HumanoidParams = field(default_factory=HumanoidParams)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        params = HumanoidParams(**{k: tuple(v) for k, v in d.pop("params", {}).items()})
        for key in ("styles", "kinds"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(params=params, **d)

    def to_dict(self):
        d = asdict(self)
        d["styles"], d["kinds"] = list(self.styles), list(self.kinds)
        d["params"] = {k: list(v) for k, v in d["params"].items()}
        return d


SYNTH_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": {"type": "integer"},
        "n_characters": {"type": "integer", "minimum": 2},
        "styles": {"type": "array", "items": {"enum": list(STYLES)}, "minItems": 1},
        "kinds": {"type": "array", "items": {"enum": list(MOTION_KINDS)}, "minItems": 2},
        "clips_per_kind": {"type": "integer", "minimum": 1},
        "eval_clips_per_kind": {"type": "integer", "minimum": 0},
        "frames": {"type": "integer", "minimum": 2},
        "fps": {"type": "number", "exclusiveMinimum": 0},
        "holdout_characters": {"type": "number", "minimum": 0, "maximum": 1},
        "holdout_motions": {"type": "number", "minimum": 0, "maximum": 1},
        "split_ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "params": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "number"},
                                                               "minItems": 2, "maxItems": 2}},
    },
    "additionalProperties": False,
}

_ID = {"type": "string"}
MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["format", "config", "characters", "motions", "splits"],
    "properties": {
        "format": {"const": MANIFEST_FORMAT},
        "config": {"type": "object"},
        "characters": {"type": "array", "items": {
            "type": "object",
            "required": ["id", "style", "seed", "topology", "base", "transform", "n_joints", "file"],
            "properties": {
                "id": _ID, "style": _ID, "seed": {"type": "integer"},
                "topology": {"enum": ["base", "variant"]},
                "base": {"type": ["string", "null"]},
                "transform": {"type": ["array", "null"]},
                "n_joints": {"type": "integer"},
                "file": _ID,
            }}},
        "motions": {"type": "array", "items": {
            "type": "object",
            "required": ["id", "character", "kind", "seed", "frames", "file"],
            "properties": {"id": _ID, "character": _ID, "kind": {"enum": list(MOTION_KINDS)},
                           "seed": {"type": "integer"}, "frames": {"type": "integer"}, "file": _ID}}},
        "splits": {"type": "object", "required": ["train", *SPLIT_TAGS]},
    },
}


def motion_id(character, kind, seed):
    return f"{character}__{kind}_s{seed}"


@dataclass
class Dataset:
    """In-memory synthetic dataset plus its manifest."""

    skeletons: dict
    motions: dict
    manifest: dict

    def character(self, cid):
        return next(c for c in self.manifest["characters"] if c["id"] == cid)

    def variants_of(self, cid):
        return [c["id"] for c in self.manifest["characters"] if c["base"] == cid]

    def motion(self, cid, kind, seed):
        return self.motions[motion_id(cid, kind, seed)]

    def training_pool(self, include_variants=True):
        """(skeleton, motion) pairs of the training split."""
        train = self.manifest["splits"]["train"]
        chars = list(train["characters"])
        if include_variants:
            chars += [v for c in train["characters"] for v in self.variants_of(c)]
        return [(self.skeletons[c], self.motion(c, k, s)) for c in chars for k, s in train["motions"]]


def build_dataset(config: SynthConfig) -> Dataset:
    skeletons, motions = {}, {}
    characters, motion_entries = [], []
    char_ids = []
    for i in range(config.n_characters):
        cid = f"char{i:02d}"
        style = config.styles[i % len(config.styles)]
        cseed = config.seed * 1000 + i
        sk = generate_humanoid(config.params, style, cseed, name=cid)
        skeletons[cid] = sk
        char_ids.append(cid)
        characters.append({"id": cid, "style": style, "seed": cseed, "topology": "base", "base": None,
                           "transform": None, "n_joints": sk.n_joints, "file": f"characters/{cid}.bvh"})
    train_clips = [(k, config.seed * 100 + c) for k in config.kinds for c in range(config.clips_per_kind)]
    eval_clips = [(k, config.seed * 100 + 50 + c) for k in config.kinds for c in range(config.eval_clips_per_kind)]
    train, splits = make_splits(
        char_ids, train_clips, config.holdout_characters, config.holdout_motions, config.seed,
        eval_motions=[m for m in eval_clips if m[0] in {k for k, _ in train_clips}] or None,
    )
    if config.eval_clips_per_kind:
        unseen = {k for k, _ in splits["sc+um"].motions}
        sm = [m for m in eval_clips if m[0] not in unseen]
        for tag in ("sc+sm", "uc+sm"):
            splits[tag].motions = sm
    clips = sorted(set(train_clips) | set(eval_clips), key=lambda m: (config.kinds.index(m[0]), m[1]))
    for cid in list(char_ids):
        base = skeletons[cid]
        transform = default_split_transform(base, config.split_ratio)
        vid = f"{cid}_split"
        for kind, mseed in clips:
            m = generate_motion(base, kind, config.frames, mseed, config.fps)
            motions[motion_id(cid, kind, mseed)] = m
            vsk, vm = paired_variant(base, m, transform, name=vid)
            skeletons[vid] = vsk
            motions[motion_id(vid, kind, mseed)] = vm
            for owner in (cid, vid):
                motion_entries.append({"id": motion_id(owner, kind, mseed), "character": owner, "kind": kind,
                                       "seed": mseed, "frames": config.frames,
                                       "file": f"motions/{motion_id(owner, kind, mseed)}.bvh"})
        characters.append({"id": vid, "style": characters[char_ids.index(cid)]["style"],
                           "seed": characters[char_ids.index(cid)]["seed"], "topology": "variant", "base": cid,
                           "transform": transform, "n_joints": skeletons[vid].n_joints,
                           "file": f"characters/{vid}.bvh"})
    manifest = {
        "format": MANIFEST_FORMAT,
        "config": config.to_dict(),
        "characters": characters,
        "motions": motion_entries,
        "splits": {"train": train.to_dict(), **{t: s.to_dict() for t, s in splits.items()}},
    }
    return Dataset(skeletons, motions, manifest)


def write_dataset(dataset: Dataset, out_dir):
    """Write T-pose BVHs per character, one BVH per motion, and ``manifest.json``."""
    import jsonschema

    jsonschema.validate(dataset.manifest, MANIFEST_SCHEMA)
    os.makedirs(os.path.join(out_dir, "characters"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "motions"), exist_ok=True)
    for c in dataset.manifest["characters"]:
        sk = dataset.skeletons[c["id"]]
        rest = Motion.identity(1, sk.n_joints, root_positions=sk.offsets[0])
        write_bvh(BvhDocument.from_motion(sk, rest), os.path.join(out_dir, c["file"]))
    for m in dataset.manifest["motions"]:
        sk = dataset.skeletons[m["character"]]
        write_bvh(BvhDocument.from_motion(sk, dataset.motions[m["id"]]), os.path.join(out_dir, m["file"]))
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(dataset.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(data_dir) -> Dataset:
    """Read a dataset written by :func:`write_dataset` back from BVH files."""
    import jsonschema

    from .bvh import parse_bvh

    with open(os.path.join(data_dir, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    jsonschema.validate(manifest, MANIFEST_SCHEMA)
    skeletons, motions = {}, {}
    for c in manifest["characters"]:
        doc = parse_bvh(os.path.join(data_dir, c["file"]))
        skeletons[c["id"]] = Skeleton(doc.skeleton.joints, c["id"])
    for m in manifest["motions"]:
        doc = parse_bvh(os.path.join(data_dir, m["file"]))
        ref = skeletons[m["character"]]
        if doc.skeleton.names != ref.names:
            raise ValueError(f"{m['file']}: hierarchy differs from character {m['character']}")
        motions[m["id"]] = doc.motion
    return Dataset(skeletons, motions, manifest)


def fk_match_error(skeleton_a, motion_a, skeleton_b, motion_b) -> float:
    """Largest position difference over joints present (by name) in both skeletons."""
    pa = forward_kinematics(skeleton_a, motion_a)
    pb = forward_kinematics(skeleton_b, motion_b)
    common = [n for n in skeleton_a.names if n in set(skeleton_b.names)]
    ia = [skeleton_a.index(n) for n in common]
    ib = [skeleton_b.index(n) for n in common]
    return float(np.max(np.abs(pa[:, ia] - pb[:, ib])))
