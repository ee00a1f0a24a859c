import math
from dataclasses import dataclass, field

import torch
from torch.optim.optimizer import Optimizer

from ..errors import NonFiniteGradient


@dataclass
class AdamWState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.99
    weight_decay: float = 0.0
    eps: float = 1e-8
    step: int = 0
    exp_avg: list = field(default_factory=list)
    exp_avg_sq: list = field(default_factory=list)


@torch.no_grad()
def adamw_step(params, grads, state: AdamWState):
    """One decoupled-weight-decay Adam update, in place on ``params``.

    Moments are created lazily on the first call. Returns ``(params, state)``.
    """
    params = list(params)
    grads = list(grads)
    for g in grads:
        if g is not None and not bool(torch.isfinite(g).all()):
            raise NonFiniteGradient("gradient contains NaN or Inf")
    if not state.exp_avg:
        state.exp_avg = [torch.zeros_like(p) for p in params]
        state.exp_avg_sq = [torch.zeros_like(p) for p in params]
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    step_size = state.lr / bc1
    for p, g, m, v in zip(params, grads, state.exp_avg, state.exp_avg_sq):
        if state.weight_decay:
            p.mul_(1.0 - state.lr * state.weight_decay)
        if g is None:
            continue
        m.mul_(state.beta1).add_(g, alpha=1.0 - state.beta1)
        v.mul_(state.beta2).addcmul_(g, g, value=1.0 - state.beta2)
        denom = (v / bc2).sqrt_().add_(state.eps)
        p.addcdiv_(m, denom, value=-step_size)
    return params, state


class AdamW(Optimizer):
    """torch.optim-compatible wrapper around :func:`adamw_step`."""

    def __init__(self, params, lr=1e-4, betas=(0.9, 0.99), eps=1e-8, weight_decay=0.0):
        defaults = dict(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay)
        super().__init__(params, defaults)
        self.group_states = [
            AdamWState(g["lr"], g["betas"][0], g["betas"][1], g["weight_decay"], g["eps"])
            for g in self.param_groups
        ]

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group, state in zip(self.param_groups, self.group_states):
            state.lr = group["lr"]
            params = group["params"]
            adamw_step(params, [p.grad for p in params], state)
        return loss

    @property
    def step_count(self):
        return self.group_states[0].step if self.group_states else 0
