"""Rotation helpers in double precision.

Matrices act on column vectors. The 6D representation stores the first two
columns of a rotation matrix, ``r = (a, b)``; Gram-Schmidt recovers the full
matrix. Euler angles only appear here for BVH I/O.
"""
import warnings

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DegenerateRotation, NotARotation

DEGENERATE_EPS = 1e-8
ROTATION_TOL = 1e-5


def rotation6d_to_matrix(r):
    """Gram-Schmidt a ``(..., 6)`` array into ``(..., 3, 3)`` rotation matrices.

    Raises DegenerateRotation when ``a`` vanishes or ``b`` is parallel to it.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != 6:
        raise ValueError(f"expected trailing dimension 6, got shape {r.shape}")
    a, b = r[..., :3], r[..., 3:]
    a_norm = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(a_norm < DEGENERATE_EPS):
        raise DegenerateRotation("first 6D column has (near) zero length")
    c1 = a / a_norm
    b_perp = b - np.sum(b * c1, axis=-1, keepdims=True) * c1
    b_norm = np.linalg.norm(b_perp, axis=-1, keepdims=True)
    if np.any(b_norm < DEGENERATE_EPS):
        raise DegenerateRotation("6D columns are (near) colinear")
    c2 = b_perp / b_norm
    c3 = np.cross(c1, c2)
    return np.stack([c1, c2, c3], axis=-1)


def is_rotation(m, tol=ROTATION_TOL):
    m = np.asarray(m, dtype=np.float64)
    eye = np.eye(3)
    mtm = np.swapaxes(m, -1, -2) @ m
    return bool(
        np.all(np.abs(mtm - eye) <= tol) and np.all(np.abs(np.linalg.det(m) - 1.0) <= tol)
    )


def matrix_to_rotation6d(m):
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-2:] != (3, 3):
        raise ValueError(f"expected (..., 3, 3) matrices, got shape {m.shape}")
    if not is_rotation(m):
        raise NotARotation("matrix is not orthonormal with determinant +1")
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


def identity6d(shape=()):
    r = np.zeros(tuple(shape) + (6,))
    r[..., 0] = 1.0
    r[..., 4] = 1.0
    return r


def axis_angle_matrix(axis, angle):
    """Rotation by ``angle`` radians about ``axis`` (broadcast over angle)."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    angle = np.asarray(angle, dtype=np.float64)
    return Rotation.from_rotvec(angle.reshape(-1, 1) * axis).as_matrix().reshape(angle.shape + (3, 3))


def euler_to_matrix(angles_deg, order):
    """Intrinsic Euler angles in channel order (BVH convention).

    ``order`` is e.g. ``"ZXY"``; ``angles_deg[..., i]`` belongs to axis
    ``order[i]`` and the result is ``R_order[0] @ R_order[1] @ R_order[2]``.
    """
    angles = np.asarray(angles_deg, dtype=np.float64)
    flat = angles.reshape(-1, 3)
    mats = Rotation.from_euler(order.upper(), flat, degrees=True).as_matrix()
    return mats.reshape(angles.shape[:-1] + (3, 3))


def matrix_to_euler(m, order):
    m = np.asarray(m, dtype=np.float64)
    flat = m.reshape(-1, 3, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        ang = Rotation.from_matrix(flat).as_euler(order.upper(), degrees=True)
    return ang.reshape(m.shape[:-2] + (3,))
