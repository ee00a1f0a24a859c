"""Shared builders for the test suite."""
import numpy as np
from scipy.spatial.transform import Rotation

from motion_retarget.decoder import DecoderConfig
from motion_retarget.encoder import EncoderConfig
from motion_retarget.model import ModelConfig
from motion_retarget.rotations import matrix_to_rotation6d
from motion_retarget.skeleton import Motion, Skeleton


def random_skeleton(rng, n_joints, name="rand"):
    parents = [-1] + [int(rng.integers(0, i)) for i in range(1, n_joints)]
    offsets = rng.normal(size=(n_joints, 3))
    offsets[0] = 0.0
    return Skeleton.from_arrays([f"j{i}" for i in range(n_joints)], parents, offsets, name)


def random_rotations(rng, shape):
    n = int(np.prod(shape))
    mats = Rotation.random(n, random_state=int(rng.integers(2**31))).as_matrix()
    return mats.reshape(tuple(shape) + (3, 3))


def random_motion(rng, n_joints, frames=4, fps=30.0):
    rot = matrix_to_rotation6d(random_rotations(rng, (frames, n_joints)))
    return Motion(rng.normal(size=(frames, 3)), rot, fps)


def tiny_model_config(d=16, m=2, layers=1, dtype="float64", window=8, attention="full"):
    return ModelConfig(
        EncoderConfig(d_model=d, pool_queries=m, layers=layers, heads=2, ff_mult=2, dropout=0.0,
                      attention=attention, name_dim=d),
        DecoderConfig(d_model=d, layers=layers, heads=2, ff_mult=2, dropout=0.0, attention=attention,
                      name_dim=d),
        name_provider={"kind": "lexical", "dim": d, "seed": 0},
        window_length=window,
        dtype=dtype,
    )


MIXAMO_22 = [
    ("Hips", None), ("Spine", "Hips"), ("Spine1", "Spine"), ("Spine2", "Spine1"), ("Neck", "Spine2"),
    ("Head", "Neck"), ("LeftShoulder", "Spine2"), ("LeftArm", "LeftShoulder"), ("LeftForeArm", "LeftArm"),
    ("LeftHand", "LeftForeArm"), ("RightShoulder", "Spine2"), ("RightArm", "RightShoulder"),
    ("RightForeArm", "RightArm"), ("RightHand", "RightForeArm"), ("LeftUpLeg", "Hips"), ("LeftLeg", "LeftUpLeg"),
    ("LeftFoot", "LeftLeg"), ("LeftToeBase", "LeftFoot"), ("RightUpLeg", "Hips"), ("RightLeg", "RightUpLeg"),
    ("RightFoot", "RightLeg"), ("RightToeBase", "RightFoot"),
]

_MIXAMO_OFFSETS = {
    "Spine": (0, 0.1, 0), "Spine1": (0, 0.12, 0), "Spine2": (0, 0.12, 0), "Neck": (0, 0.15, 0),
    "Head": (0, 0.1, 0), "LeftShoulder": (0.06, 0.1, 0), "LeftArm": (0.12, 0, 0), "LeftForeArm": (0.26, 0, 0),
    "LeftHand": (0.24, 0, 0), "LeftUpLeg": (0.09, -0.05, 0), "LeftLeg": (0, -0.42, 0),
    "LeftFoot": (0, -0.4, 0), "LeftToeBase": (0, -0.05, 0.12),
}


def mixamo_skeleton(extra=()):
    """The standard 22-joint Mixamo hierarchy, optionally with extra ``(name, parent, offset)`` joints."""
    names, parents, offsets = [], [], []
    for name, parent, *off in list(MIXAMO_22) + list(extra):
        names.append(name)
        parents.append(-1 if parent is None else names.index(parent))
        if off:
            offsets.append(off[0])
            continue
        key = name.replace("Right", "Left")
        o = np.array(_MIXAMO_OFFSETS.get(key, (0, 0, 0)), dtype=float)
        if name.startswith("Right"):
            o[0] = -o[0]
        offsets.append(o)
    return Skeleton.from_arrays(names, parents, offsets, "mixamo")


_AXES = "XYZ"


def _random_order(rng):
    return "".join(rng.permutation(list(_AXES)))


def generated_bvh(seed, max_joints=14, frames=None):
    """BVH text for a random hierarchy with random channel layouts and angles.

    Written by hand here (not by the package writer) so the round-trip corpus
    is independent of the code under test. Middle Euler angles stay inside
    (-89, 89) so the file's angles are the canonical decomposition.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_joints + 1))
    parents = [-1] + [int(rng.integers(0, i)) for i in range(1, n)]
    children = {i: [k for k in range(n) if parents[k] == i] for i in range(n)}
    frames = int(rng.integers(0, 6)) if frames is None else frames
    layouts = []
    lines = ["HIERARCHY"]

    def fmt(v):
        return " ".join(f"{x:.6f}" for x in v)

    def emit(j, depth):
        pad = "\t" * depth
        lines.append(f"{pad}{'ROOT' if j == 0 else 'JOINT'} J{j}_{seed}")
        lines.append(pad + "{")
        off = np.zeros(3) if j == 0 else rng.uniform(-20, 20, size=3)
        lines.append(f"{pad}\tOFFSET {fmt(off)}")
        chans = [f"{a}rotation" for a in _random_order(rng)]
        if j == 0:
            chans = [f"{a}position" for a in "XYZ"] + chans
        layouts.append((chans, off))
        lines.append(f"{pad}\tCHANNELS {len(chans)} {' '.join(chans)}")
        for c in children[j]:
            emit(c, depth + 1)
        if not children[j] or rng.random() < 0.3:
            lines.append(f"{pad}\tEnd Site\n{pad}\t{{\n{pad}\t\tOFFSET {fmt(rng.uniform(-5, 5, size=3))}\n{pad}\t}}")
        lines.append(pad + "}")

    emit(0, 0)
    lines += ["MOTION", f"Frames: {frames}", f"Frame Time: {1 / 30:.8f}"]
    for _ in range(frames):
        row = []
        for chans, _off in layouts:
            rot = [c for c in chans if c.endswith("rotation")]
            if len(chans) > 3:
                row += list(rng.uniform(-100, 100, size=3))
            row += [rng.uniform(-179, 179), rng.uniform(-89, 89), rng.uniform(-179, 179)][: len(rot)]
        lines.append(fmt(row))
    return "\n".join(lines) + "\n"


def channel_table(text):
    """Motion values of a BVH text as a (frames, channels) array, read independently of the parser."""
    body = text.split("MOTION", 1)[1].split()
    frames = int(body[body.index("Frames:") + 1])
    start = body.index("Time:") + 2
    values = np.array([float(v) for v in body[start:]])
    return values.reshape(frames, -1) if frames else values.reshape(0, 0)


def round_trip_error(doc_a, doc_b):
    """Max deviation between two parsed documents; inf when topology differs.

    Joints are matched by name because BVH stores them depth-first, which may
    reorder a skeleton that was only topologically sorted.
    """
    from motion_retarget.rotations import rotation6d_to_matrix

    sa, sb = doc_a.skeleton, doc_b.skeleton
    if sorted(sa.names) != sorted(sb.names) or doc_a.motion.frame_count != doc_b.motion.frame_count:
        return np.inf
    perm = [sb.index(n) for n in sa.names]
    parent_name = lambda sk, j: None if sk.joints[j].parent is None else sk.joints[sk.joints[j].parent].name
    for ia, ib in enumerate(perm):
        if parent_name(sa, ia) != parent_name(sb, ib) or doc_a.channel_layout[ia] != doc_b.channel_layout[ib]:
            return np.inf
    errs = [np.max(np.abs(sa.offsets - sb.offsets[perm]))]
    if doc_a.motion.frame_count:
        errs.append(np.max(np.abs(doc_a.motion.root_positions - doc_b.motion.root_positions)))
        ma = rotation6d_to_matrix(doc_a.motion.rotations)
        mb = rotation6d_to_matrix(doc_b.motion.rotations[:, perm])
        errs.append(np.max(np.abs(ma - mb)))
    return float(max(errs))


FINGERS_8 = [
    (f"{side}HandIndex{k}", f"{side}Hand" if k == 1 else f"{side}HandIndex{k - 1}", (s * 0.03, 0, 0))
    for side, s in (("Left", 1), ("Right", -1)) for k in range(1, 5)
]


def humanoid_16():
    """A 16-joint humanoid: single spine, no shoulders or toes."""
    keep = ["Hips", "Spine", "Neck", "Head", "LeftArm", "LeftForeArm", "LeftHand", "RightArm", "RightForeArm",
            "RightHand", "LeftUpLeg", "LeftLeg", "LeftFoot", "RightUpLeg", "RightLeg", "RightFoot"]
    parent = {"Neck": "Spine", "LeftArm": "Spine", "RightArm": "Spine"}
    full = dict(MIXAMO_22)
    offsets = {"Spine": (0, 0.3, 0), "Neck": (0, 0.2, 0), "LeftArm": (0.15, 0.15, 0), "RightArm": (-0.15, 0.15, 0)}
    sk22 = mixamo_skeleton()
    names, parents, offs = [], [], []
    for n in keep:
        names.append(n)
        p = parent.get(n, full[n])
        parents.append(-1 if p is None else names.index(p))
        offs.append(offsets.get(n, sk22.offsets[sk22.index(n)]))
    return Skeleton.from_arrays(names, parents, offs, "humanoid16")


def motion_for(skeleton, rng, frames=8, spread=0.4):
    """Smallish random rotations around the T-pose and a root near standing height."""
    rot = Rotation.from_rotvec(rng.normal(scale=spread, size=(frames * skeleton.n_joints, 3))).as_matrix()
    root = np.array([0.0, 1.0, 0.0]) + rng.normal(scale=0.05, size=(frames, 3))
    return Motion(root, matrix_to_rotation6d(rot.reshape(frames, skeleton.n_joints, 3, 3)))
