"""Differentiable rotation and FK helpers for the model path."""
import torch

EPS = 1e-8


def rot6d_to_matrix(r):
    """Gram-Schmidt with an epsilon in each normalisation to keep gradients finite."""
    a, b = r[..., :3], r[..., 3:]
    c1 = a / (a.norm(dim=-1, keepdim=True) + EPS)
    b = b - (b * c1).sum(-1, keepdim=True) * c1
    c2 = b / (b.norm(dim=-1, keepdim=True) + EPS)
    c3 = torch.cross(c1, c2, dim=-1)
    return torch.stack([c1, c2, c3], dim=-1)


def matrix_to_rot6d(m):
    return torch.cat([m[..., :, 0], m[..., :, 1]], dim=-1)


def normalize_rot6d(r):
    return matrix_to_rot6d(rot6d_to_matrix(r))


def forward_kinematics(parents, offsets, rot6d, root_positions=None):
    """Global positions for one skeleton.

    ``parents``: sequence of ints (root first); ``offsets``: (N, 3);
    ``rot6d``: (..., N, 6); ``root_positions``: (..., 3) or None for origin.
    Returns (..., N, 3).
    """
    mats = rot6d_to_matrix(rot6d)
    n = len(parents)
    lead = rot6d.shape[:-2]
    glob_r = [mats[..., 0, :, :]]
    root = torch.zeros(*lead, 3, dtype=rot6d.dtype) if root_positions is None else root_positions
    glob_p = [root]
    for j in range(1, n):
        p = parents[j]
        glob_p.append(glob_p[p] + (glob_r[p] @ offsets[j].unsqueeze(-1)).squeeze(-1))
        glob_r.append(glob_r[p] @ mats[..., j, :, :])
    return torch.stack(glob_p, dim=-2)
