import numpy as np
import torch


def grad_check(f, inputs, h=1e-5, max_entries=None, seed=0, floor=1e-6):
    """Compare reverse-mode gradients with central finite differences.

    ``f`` maps the tensor(s) in ``inputs`` to a scalar tensor. Inputs are
    perturbed in place, so they must be leaf tensors (parameters are fine); run
    this in double precision. With ``max_entries`` only a seeded random subset
    of coordinates per tensor is probed.

    Returns the max over probed entries of ``|g - fd| / max(|g|, |fd|, floor * max(1, |f|))``.
    The floor scales with ``|f|`` because central differences carry an absolute
    round-off of about ``eps * |f| / h``; a gradient that is exactly zero (a key
    bias under softmax, say) would otherwise report pure noise as error.
    """
    single = isinstance(inputs, torch.Tensor)
    tensors = [inputs] if single else list(inputs)
    flags = [t.requires_grad for t in tensors]
    for t in tensors:
        t.requires_grad_(True)
        t.grad = None
    out = f(*tensors) if single else f()
    grads = torch.autograd.grad(out, tensors, allow_unused=True)
    denom_floor = floor * max(1.0, abs(out.item()))
    rng = np.random.default_rng(seed)
    worst = 0.0
    with torch.no_grad():
        for t, g in zip(tensors, grads):
            g = torch.zeros_like(t) if g is None else g
            flat = t.view(-1)
            gflat = g.reshape(-1)
            idx = np.arange(flat.numel())
            if max_entries is not None and flat.numel() > max_entries:
                idx = rng.choice(flat.numel(), size=max_entries, replace=False)
            for i in idx:
                orig = flat[i].item()
                flat[i] = orig + h
                up = (f(*tensors) if single else f()).item()
                flat[i] = orig - h
                down = (f(*tensors) if single else f()).item()
                flat[i] = orig
                fd = (up - down) / (2 * h)
                a = gflat[i].item()
                err = abs(a - fd) / max(abs(a), abs(fd), denom_floor)
                worst = max(worst, err)
    for t, flag in zip(tensors, flags):
        t.requires_grad_(flag)
    return worst
