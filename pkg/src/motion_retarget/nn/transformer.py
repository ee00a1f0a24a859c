"""Pre-norm transformer layers over ``(T, B, S, D)`` token grids.

``attention="full"`` attends jointly over all ``T * S`` tokens of a sample.
``attention="factorized"`` attends within each frame and then along time for
each token slot, which keeps memory linear in ``T * S`` at the cost of a
two-hop path between tokens in different frames and slots.
"""
import torch
from torch import nn

from .attention import MultiHeadAttention
from .layers import FeedForward

ATTENTION_MODES = ("full", "factorized")


def _check_mode(mode):
    if mode not in ATTENTION_MODES:
        raise ValueError(f"attention mode must be one of {ATTENTION_MODES}, got {mode!r}")


class GridSelfAttention(nn.Module):
    def __init__(self, d_model, heads, mode="full", dropout=0.0):
        super().__init__()
        _check_mode(mode)
        self.mode = mode
        self.norm = nn.LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, heads, dropout)
        if mode == "factorized":
            self.time_norm = nn.LayerNorm(d_model)
            self.time_attn = MultiHeadAttention(d_model, heads, dropout)

    def forward(self, x, slot_mask=None):
        """``x``: (T, B, S, D); ``slot_mask``: (B, S) with True for real tokens."""
        t, b, s, d = x.shape
        if self.mode == "full":
            h = self.norm(x).permute(1, 0, 2, 3).reshape(b, t * s, d)
            mask = None if slot_mask is None else slot_mask.unsqueeze(1).expand(b, t, s).reshape(b, t * s)
            out = self.attn(h, h, key_mask=mask)
            return x + out.reshape(b, t, s, d).permute(1, 0, 2, 3)
        h = self.norm(x)
        mask = None if slot_mask is None else slot_mask.unsqueeze(0).expand(t, b, s)
        x = x + self.attn(h, h, key_mask=mask)
        # each slot only sees itself along time, so padded slots never leak
        h = self.time_norm(x).permute(1, 2, 0, 3)
        out = self.time_attn(h, h)
        return x + out.permute(2, 0, 1, 3)


class GridCrossAttention(nn.Module):
    def __init__(self, d_model, heads, mode="full", dropout=0.0):
        super().__init__()
        _check_mode(mode)
        self.mode = mode
        self.norm = nn.LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, heads, dropout)

    def forward(self, x, keys, values):
        """``x``: (T, B, S, D); ``keys``/``values``: (T, B, M, D)."""
        t, b, s, d = x.shape
        h = self.norm(x)
        if self.mode == "full":
            m = keys.shape[2]
            q = h.permute(1, 0, 2, 3).reshape(b, t * s, d)
            k = keys.permute(1, 0, 2, 3).reshape(b, t * m, d)
            v = values.permute(1, 0, 2, 3).reshape(b, t * m, d)
            out = self.attn(q, k, v)
            return x + out.reshape(b, t, s, d).permute(1, 0, 2, 3)
        return x + self.attn(h, keys, values)


class EncoderLayer(nn.Module):
    def __init__(self, d_model, heads, ff_mult=4, dropout=0.0, mode="full"):
        super().__init__()
        self.self_attn = GridSelfAttention(d_model, heads, mode, dropout)
        self.ff_norm = nn.LayerNorm(d_model)
        self.ff = FeedForward(d_model, ff_mult, dropout)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, slot_mask=None):
        x = self.self_attn(x, slot_mask)
        return x + self.dropout(self.ff(self.ff_norm(x)))


class DecoderLayer(nn.Module):
    def __init__(self, d_model, heads, ff_mult=4, dropout=0.0, mode="full"):
        super().__init__()
        self.self_attn = GridSelfAttention(d_model, heads, mode, dropout)
        self.cross_attn = GridCrossAttention(d_model, heads, mode, dropout)
        self.ff_norm = nn.LayerNorm(d_model)
        self.ff = FeedForward(d_model, ff_mult, dropout)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, keys, values, slot_mask=None):
        x = self.self_attn(x, slot_mask)
        x = self.cross_attn(x, keys, values)
        return x + self.dropout(self.ff(self.ff_norm(x)))
