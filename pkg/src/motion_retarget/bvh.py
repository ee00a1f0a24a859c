"""BVH reader and writer.

End Sites become leaf joints named ``<parent>_End`` so end effectors take part
in forward kinematics. Positions stay in file units. Non-root position
channels are read and dropped with a warning because the motion model only
carries a root translation.
"""
from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BvhSyntaxError, FrameCountMismatch, UnsupportedChannel
from .rotations import euler_to_matrix, identity6d, matrix_to_euler, matrix_to_rotation6d, rotation6d_to_matrix
from .skeleton import JointSpec, Motion, Skeleton, check_motion

log = logging.getLogger(__name__)

_CHANNELS = {
    "xposition": "Xposition",
    "yposition": "Yposition",
    "zposition": "Zposition",
    "xrotation": "Xrotation",
    "yrotation": "Yrotation",
    "zrotation": "Zrotation",
}
DEFAULT_ROOT_CHANNELS = ("Xposition", "Yposition", "Zposition", "Zrotation", "Xrotation", "Yrotation")
DEFAULT_JOINT_CHANNELS = ("Zrotation", "Xrotation", "Yrotation")


@dataclass(frozen=True, eq=False)
class BvhDocument:
    skeleton: Skeleton
    motion: Motion
    channel_layout: tuple
    euler_order: tuple

    def __post_init__(self):
        check_motion(self.skeleton, self.motion)
        layout = tuple(tuple(c) for c in self.channel_layout)
        if len(layout) != self.skeleton.n_joints or len(self.euler_order) != self.skeleton.n_joints:
            raise ValueError("channel_layout and euler_order need one entry per joint")
        object.__setattr__(self, "channel_layout", layout)
        object.__setattr__(self, "euler_order", tuple(self.euler_order))

    @property
    def channel_count(self):
        return sum(len(c) for c in self.channel_layout)

    @classmethod
    def from_motion(cls, skeleton: Skeleton, motion: Motion):
        """Default layout: 6-channel root, ZXY rotations, End Sites for static ``*_End`` leaves."""
        check_motion(skeleton, motion)
        layout, order = [], []
        ident = identity6d()
        for i, joint in enumerate(skeleton.joints):
            if i == 0:
                layout.append(DEFAULT_ROOT_CHANNELS)
                order.append("ZXY")
            elif _is_end_site(skeleton, i) and np.allclose(motion.rotations[:, i], ident, atol=1e-12):
                layout.append(())
                order.append("")
            else:
                layout.append(DEFAULT_JOINT_CHANNELS)
                order.append("ZXY")
        return cls(skeleton, motion, tuple(layout), tuple(order))


def _is_end_site(skeleton, i):
    joint = skeleton.joints[i]
    if joint.parent is None or skeleton.children(i):
        return False
    return joint.name == f"{skeleton.joints[joint.parent].name}_End"


class _Tokens:
    def __init__(self, text):
        self.items = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, lineno))
        self.pos = 0

    def peek(self):
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def line(self):
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else 0

    def next(self, what="token"):
        if self.pos >= len(self.items):
            raise BvhSyntaxError(f"unexpected end of file, expected {what}", self.line())
        tok = self.items[self.pos][0]
        self.pos += 1
        return tok

    def expect(self, *words):
        line = self.line()
        tok = self.next(" ".join(words))
        if tok.upper() not in {w.upper() for w in words}:
            raise BvhSyntaxError(f"expected {'/'.join(words)}, got {tok!r}", line)
        return tok

    def number(self, cast=float):
        line = self.line()
        tok = self.next("number")
        try:
            return cast(tok)
        except ValueError:
            raise BvhSyntaxError(f"expected a number, got {tok!r}", line) from None


def parse_bvh(source) -> BvhDocument:
    """Parse BVH text (str, bytes, path or file object)."""
    text = _read_text(source)
    toks = _Tokens(text)
    toks.expect("HIERARCHY")
    names, parents, offsets, layouts = [], [], [], []

    def unique(name):
        base, k = name, 1
        while name in names:
            name = f"{base}{k}"
            k += 1
        return name

    def parse_joint(parent, is_root):
        name = unique(toks.next("joint name"))
        idx = len(names)
        names.append(name)
        parents.append(parent)
        offsets.append(None)
        layouts.append(())
        toks.expect("{")
        while True:
            line = toks.line()
            tok = toks.next("joint body")
            key = tok.upper()
            if key == "OFFSET":
                offsets[idx] = [toks.number() for _ in range(3)]
            elif key == "CHANNELS":
                count = toks.number(int)
                chans = []
                for _ in range(count):
                    c_line = toks.line()
                    c = toks.next("channel name")
                    if c.lower() not in _CHANNELS:
                        raise UnsupportedChannel(f"line {c_line}: unsupported channel {c!r}")
                    chans.append(_CHANNELS[c.lower()])
                layouts[idx] = tuple(chans)
            elif key == "JOINT":
                parse_joint(idx, False)
            elif key == "END":
                toks.expect("Site")
                end_name = unique(f"{name}_End")
                end_idx = len(names)
                names.append(end_name)
                parents.append(idx)
                offsets.append(None)
                layouts.append(())
                toks.expect("{")
                toks.expect("OFFSET")
                offsets[end_idx] = [toks.number() for _ in range(3)]
                toks.expect("}")
            elif key == "}":
                break
            else:
                raise BvhSyntaxError(f"unexpected token {tok!r} in joint {name!r}", line)
        if offsets[idx] is None:
            raise BvhSyntaxError(f"joint {name!r} has no OFFSET", toks.line())

    toks.expect("ROOT")
    parse_joint(None, True)
    toks.expect("MOTION")
    toks.expect("Frames:")
    frames = toks.number(int)
    toks.expect("Frame")
    toks.expect("Time:")
    frame_time = toks.number()
    values = []
    while toks.peek() is not None:
        values.append(toks.number())
    n_channels = sum(len(c) for c in layouts)
    if len(values) != frames * n_channels:
        raise FrameCountMismatch(
            f"expected {frames} frames x {n_channels} channels = {frames * n_channels} values, got {len(values)}"
        )
    data = np.asarray(values, dtype=np.float64).reshape(frames, n_channels)

    skeleton = Skeleton.from_arrays(names, [-1 if p is None else p for p in parents], offsets)
    n = len(names)
    rot6d = np.empty((frames, n, 6))
    root_pos = np.tile(np.asarray(offsets[0], dtype=np.float64), (frames, 1))
    orders = []
    col = 0
    for j, chans in enumerate(layouts):
        block = data[:, col : col + len(chans)]
        col += len(chans)
        pos_axes = [c[0] for c in chans if c.endswith("position")]
        rot_axes = "".join(c[0] for c in chans if c.endswith("rotation"))
        orders.append(rot_axes)
        if pos_axes:
            if j == 0:
                for k, c in enumerate(chans):
                    if c.endswith("position"):
                        root_pos[:, "XYZ".index(c[0])] = block[:, k]
            else:
                log.warning("ignoring position channels on non-root joint %r", names[j])
        rot_vals = np.stack([block[:, k] for k, c in enumerate(chans) if c.endswith("rotation")], axis=-1) if rot_axes else None
        if rot_vals is None:
            rot6d[:, j] = identity6d()
            continue
        mats = np.broadcast_to(np.eye(3), (frames, 3, 3)).copy()
        for k, axis in enumerate(rot_axes):
            mats = mats @ euler_to_matrix(_single_axis(rot_vals[:, k], axis), "XYZ")
        rot6d[:, j] = matrix_to_rotation6d(mats) if frames else np.empty((0, 6))
    fps = 1.0 / frame_time if frame_time > 0 else 30.0
    # "Frame Time: 0.033333" means 30 fps
    if abs(fps - round(fps)) < 1e-3 * fps:
        fps = float(round(fps))
    motion = Motion(root_pos, rot6d, fps)
    return BvhDocument(skeleton, motion, tuple(layouts), tuple(orders))


def _single_axis(values, axis):
    out = np.zeros(values.shape + (3,))
    out[..., "XYZ".index(axis)] = values
    return out


def _read_text(source):
    if isinstance(source, bytes):
        return source.decode("ascii", errors="replace")
    if isinstance(source, (str, os.PathLike)) and not (isinstance(source, str) and "\n" in source):
        if os.path.exists(source):
            with open(source, "r", encoding="ascii", errors="replace") as fh:
                return fh.read()
        if isinstance(source, os.PathLike) or not source.lstrip().upper().startswith("HIERARCHY"):
            raise FileNotFoundError(f"no such BVH file: {source}")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("ascii", errors="replace") if isinstance(data, bytes) else data


def write_bvh(doc: BvhDocument, target=None) -> Optional[str]:
    """Serialise a document; returns the text, or writes it when ``target`` is given."""
    sk, motion = doc.skeleton, doc.motion
    out = io.StringIO()
    out.write("HIERARCHY\n")

    def fmt(vals):
        return " ".join(f"{v:.6f}" for v in vals)

    # motion columns follow the depth-first order of the hierarchy
    written = []

    def emit(j, depth):
        pad = "  " * depth
        joint = sk.joints[j]
        written.append(j)
        keyword = "ROOT" if j == 0 else "JOINT"
        out.write(f"{pad}{keyword} {joint.name}\n{pad}{{\n")
        out.write(f"{pad}  OFFSET {fmt(joint.offset)}\n")
        chans = doc.channel_layout[j]
        out.write(f"{pad}  CHANNELS {len(chans)}{''.join(' ' + c for c in chans)}\n")
        for c in sk.children(j):
            if not doc.channel_layout[c] and _is_end_site(sk, c):
                out.write(f"{pad}  End Site\n{pad}  {{\n{pad}    OFFSET {fmt(sk.joints[c].offset)}\n{pad}  }}\n")
            else:
                emit(c, depth + 1)
        out.write(f"{pad}}}\n")

    emit(0, 0)
    out.write("MOTION\n")
    out.write(f"Frames: {motion.frame_count}\n")
    out.write(f"Frame Time: {1.0 / motion.fps:.8f}\n")
    if motion.frame_count:
        columns = []
        mats = rotation6d_to_matrix(motion.rotations)
        for j in written:
            chans = doc.channel_layout[j]
            if not chans:
                continue
            order = doc.euler_order[j]
            angles = _matrix_to_channel_angles(mats[:, j], order) if order else None
            for c in chans:
                if c.endswith("position"):
                    src = motion.root_positions if j == 0 else np.broadcast_to(sk.joints[j].offset, (motion.frame_count, 3))
                    columns.append(src[:, "XYZ".index(c[0])])
                else:
                    columns.append(angles[:, order.index(c[0])])
        table = np.stack(columns, axis=1)
        for row in table:
            out.write(fmt(np.round(row, 6) + 0.0) + "\n")
    text = out.getvalue()
    if target is None:
        return text
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        target.write(text)
    return None


def _matrix_to_channel_angles(mats, order):
    if len(order) == 3:
        return matrix_to_euler(mats, order)
    if len(order) == 0:
        return np.zeros((len(mats), 0))
    # partial layouts: extend to a full order and require the extra angles to vanish
    full = order + "".join(a for a in "XYZ" if a not in order)
    angles = matrix_to_euler(mats, full)
    if np.any(np.abs(angles[:, len(order):]) > 1e-6):
        raise UnsupportedChannel(f"rotation is not expressible with the partial Euler order {order!r}")
    return angles[:, : len(order)]
