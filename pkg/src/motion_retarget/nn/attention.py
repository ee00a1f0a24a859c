"""Scaled dot-product attention, multi-head attention and attention pooling.

Tensors are batch-leading: ``(..., L, D)``. Masks are boolean and True marks a
valid key.
"""
import math

import torch
from torch import nn

from ..errors import HeadsDivisibility, NoValidTokens, ShapeMismatch
from . import ops
from .layers import init_linear


def scaled_dot_product_attention(q, k, v, key_mask=None, return_weights=False):
    """``softmax(q k^T / sqrt(d)) v`` with masked keys receiving zero weight.

    ``key_mask`` broadcasts against ``(..., Lq, Lk)``; a ``(..., Lk)`` mask is
    expanded over queries.
    """
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ShapeMismatch(f"attention: q {tuple(q.shape)}, k {tuple(k.shape)}, v {tuple(v.shape)}")
    logits = ops.matmul(q, k.transpose(-1, -2)) / math.sqrt(q.shape[-1])
    if key_mask is not None and key_mask.dim() == logits.dim() - 1:
        key_mask = key_mask.unsqueeze(-2)
    weights = ops.masked_softmax(logits, key_mask)
    out = ops.matmul(weights, v)
    return (out, weights) if return_weights else out


def attention_pool(tokens, queries, mask=None, return_weights=False):
    """Pool ``n`` tokens into ``m`` outputs with learnable queries.

    ``tokens``: ``(..., n, D)``; ``queries``: ``(m, D)``; ``mask``: ``(..., n)``.
    Each output is ``z_i = sum_j a_ij x_j`` with
    ``a_ij = softmax_j(q_i . x_j / sqrt(D))`` over valid tokens, so the result
    has shape ``(..., m, D)`` whatever ``n`` is.
    """
    if tokens.shape[-1] != queries.shape[-1]:
        raise ShapeMismatch(f"attention_pool: tokens {tuple(tokens.shape)} vs queries {tuple(queries.shape)}")
    if mask is not None and not bool(mask.any(dim=-1).all()):
        raise NoValidTokens("attention_pool needs at least one valid token per set")
    if tokens.shape[-2] == 0:
        raise NoValidTokens("attention_pool got an empty token set")
    return scaled_dot_product_attention(queries, tokens, tokens, mask, return_weights)


class AttentionPool(nn.Module):
    def __init__(self, d_model, n_queries, generator=None):
        super().__init__()
        self.queries = nn.Parameter(torch.rand(n_queries, d_model, generator=generator))

    def forward(self, tokens, mask=None):
        return attention_pool(tokens, self.queries, mask)


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model, heads, dropout=0.0):
        super().__init__()
        if d_model % heads:
            raise HeadsDivisibility(f"d_model={d_model} is not divisible by heads={heads}")
        self.d_model = d_model
        self.heads = heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        for lin in (self.q_proj, self.k_proj, self.v_proj, self.out_proj):
            init_linear(lin)
        self.dropout = nn.Dropout(dropout)

    def _split(self, x):
        *lead, length, _ = x.shape
        return x.reshape(*lead, length, self.heads, self.d_model // self.heads).transpose(-2, -3)

    def forward(self, query, key, value=None, key_mask=None, return_weights=False):
        value = key if value is None else value
        for name, t in (("query", query), ("key", key), ("value", value)):
            if t.shape[-1] != self.d_model:
                raise ShapeMismatch(f"{name} feature dim {t.shape[-1]} != d_model {self.d_model}")
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(key))
        v = self._split(self.v_proj(value))
        if key_mask is not None:
            key_mask = key_mask.unsqueeze(-2)
        out, weights = scaled_dot_product_attention(q, k, v, key_mask, return_weights=True)
        out = out.transpose(-2, -3)
        out = out.reshape(*out.shape[:-2], self.d_model)
        out = self.out_proj(self.dropout(out))
        return (out, weights) if return_weights else out
