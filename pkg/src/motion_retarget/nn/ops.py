"""Shape-checked tensor primitives on top of torch autograd.

Each op validates operand shapes and raises ShapeMismatch (naming both
shapes) instead of torch's generic errors, then defers to torch for the
forward value and the backward rule.
"""
import torch
import torch.nn.functional as F

from ..errors import AllMaskedRow, ShapeMismatch

MASK_FILL = -1e9


def _broadcastable(a, b):
    try:
        torch.broadcast_shapes(a.shape, b.shape)
    except RuntimeError:
        return False
    return True


def _check_broadcast(op, a, b):
    if not _broadcastable(a, b):
        raise ShapeMismatch(f"{op}: cannot broadcast {tuple(a.shape)} with {tuple(b.shape)}")


def matmul(a, b):
    if a.dim() < 1 or b.dim() < 1 or a.shape[-1] != b.shape[-2 if b.dim() > 1 else 0]:
        raise ShapeMismatch(f"matmul: {tuple(a.shape)} @ {tuple(b.shape)}")
    return a @ b


def add(a, b):
    _check_broadcast("add", a, b)
    return a + b


def mul(a, b):
    _check_broadcast("mul", a, b)
    return a * b


def softmax(x, dim=-1):
    return torch.softmax(x, dim=dim)


def masked_fill(x, mask, value=MASK_FILL):
    """Replace entries where ``mask`` is False (invalid) by ``value``."""
    _check_broadcast("masked_fill", x, mask)
    return x.masked_fill(~mask, value)


def masked_softmax(logits, mask=None, dim=-1):
    """Softmax over valid entries; ``mask`` is True where an entry is valid.

    A row with no valid entry is an error rather than a silent uniform row.
    """
    if mask is None:
        return torch.softmax(logits, dim=dim)
    _check_broadcast("masked_softmax", logits, mask)
    if not bool(mask.any(dim=dim).all()):
        raise AllMaskedRow("attention row has no valid key")
    return torch.softmax(masked_fill(logits, mask), dim=dim)


def layer_norm(x, weight=None, bias=None, eps=1e-5):
    d = x.shape[-1]
    for name, p in (("weight", weight), ("bias", bias)):
        if p is not None and tuple(p.shape) != (d,):
            raise ShapeMismatch(f"layer_norm {name}: {tuple(p.shape)} vs feature dim of {tuple(x.shape)}")
    return F.layer_norm(x, (d,), weight, bias, eps)


def gelu(x):
    return F.gelu(x)


def concat(tensors, dim=-1):
    tensors = list(tensors)
    ref = tensors[0]
    nd = ref.dim()
    axis = dim % nd
    for t in tensors[1:]:
        if t.dim() != nd or any(t.shape[i] != ref.shape[i] for i in range(nd) if i != axis):
            raise ShapeMismatch(f"concat along {dim}: {tuple(ref.shape)} vs {tuple(t.shape)}")
    return torch.cat(tensors, dim=dim)


def slice_(x, dim, start, stop):
    return x.narrow(dim, start, stop - start)


def reshape(x, *shape):
    try:
        return x.reshape(*shape)
    except RuntimeError:
        raise ShapeMismatch(f"reshape: {tuple(x.shape)} -> {shape}") from None


def transpose(x, a, b):
    return x.transpose(a, b)


def mean(x, dim=None):
    return x.mean() if dim is None else x.mean(dim=dim)


def sum_sq(x):
    return (x * x).sum()
