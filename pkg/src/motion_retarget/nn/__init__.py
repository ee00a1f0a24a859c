"""Neural building blocks: masked ops, attention, AdamW, gradient checks, checkpoints."""
from .attention import AttentionPool, MultiHeadAttention, attention_pool, scaled_dot_product_attention
from .checkpoint import config_hash, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .optim import AdamW, AdamWState, adamw_step

__all__ = [
    "AdamW",
    "AdamWState",
    "AttentionPool",
    "MultiHeadAttention",
    "adamw_step",
    "attention_pool",
    "config_hash",
    "grad_check",
    "load_checkpoint",
    "save_checkpoint",
    "scaled_dot_product_attention",
]
