import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcases import op_cases
from motion_retarget.errors import AllMaskedRow, HeadsDivisibility, NoValidTokens, NonFiniteGradient, ShapeMismatch
from motion_retarget.nn import (
    AdamW,
    AdamWState,
    MultiHeadAttention,
    adamw_step,
    attention_pool,
    config_hash,
    grad_check,
    load_checkpoint,
    save_checkpoint,
)
from motion_retarget.nn import kinematics, ops

D = torch.float64
CASES = op_cases()


@pytest.mark.parametrize("name", sorted(CASES))
def test_op_gradients(name):
    f, inputs = CASES[name]
    assert grad_check(f, inputs) < 1e-4


def test_grad_check_sum_sq_is_exact():
    x = torch.randn(7, dtype=D)
    assert grad_check(ops.sum_sq, x) < 1e-8
    x.requires_grad_(True)
    ops.sum_sq(x).backward()
    assert torch.allclose(x.grad, 2 * x)


def test_grad_check_detects_wrong_gradient():
    class Wrong(torch.autograd.Function):
        @staticmethod
        def forward(ctx, x):
            return (x ** 3).sum()

        @staticmethod
        def backward(ctx, g):
            return g * torch.ones(3, dtype=D)

    assert grad_check(Wrong.apply, torch.tensor([1.0, 2.0, 3.0], dtype=D)) > 0.5


def test_softmax_uniform_and_rows_sum_to_one():
    out = ops.softmax(torch.full((4, 5), 2.5), -1)
    assert torch.allclose(out, torch.full((4, 5), 0.2))
    x = torch.randn(6, 7)
    mask = torch.rand(6, 7) > 0.4
    mask[:, 0] = True
    w = ops.masked_softmax(x, mask)
    assert torch.allclose(w.sum(-1), torch.ones(6), atol=1e-6)
    assert torch.all(w[~mask] == 0)


def test_all_masked_row_is_an_error():
    with pytest.raises(AllMaskedRow):
        ops.masked_softmax(torch.zeros(2, 3), torch.tensor([[True, False, False], [False, False, False]]))


def test_layer_norm_of_constant_is_zero():
    assert torch.allclose(ops.layer_norm(torch.full((2, 8), 3.0)), torch.zeros(2, 8))


@pytest.mark.parametrize("fn, a, b", [
    (ops.matmul, (2, 3), (4, 2)),
    (ops.add, (2, 3), (4,)),
    (ops.mul, (2, 3), (3, 2)),
    (lambda a, b: ops.concat([a, b], 0), (2, 3), (2, 4)),
])
def test_shape_mismatch_names_both_shapes(fn, a, b):
    with pytest.raises(ShapeMismatch) as info:
        fn(torch.zeros(a), torch.zeros(b))
    assert str(a) in str(info.value) and str(b) in str(info.value)


def test_reshape_mismatch():
    with pytest.raises(ShapeMismatch):
        ops.reshape(torch.zeros(2, 3), 4, 2)


def test_mha_single_key_ignores_query():
    torch.manual_seed(0)
    mha = MultiHeadAttention(8, 2).double()
    v = torch.randn(1, 1, 8, dtype=D)
    out1 = mha(torch.randn(1, 3, 8, dtype=D), v)
    out2 = mha(torch.randn(1, 3, 8, dtype=D), v)
    expected = mha.out_proj(mha.v_proj(v))
    assert torch.allclose(out1, expected.expand_as(out1)) and torch.allclose(out2, out1)


def test_mha_masked_keys_get_zero_weight():
    torch.manual_seed(0)
    mha = MultiHeadAttention(8, 4)
    mask = torch.tensor([[True, False, True, False]])
    _, w = mha(torch.randn(1, 3, 8), torch.randn(1, 4, 8), key_mask=mask, return_weights=True)
    assert torch.all(w[..., 1] == 0) and torch.all(w[..., 3] == 0)
    assert torch.allclose(w.sum(-1), torch.ones_like(w.sum(-1)))


def test_mha_errors():
    with pytest.raises(HeadsDivisibility):
        MultiHeadAttention(10, 4)
    with pytest.raises(ShapeMismatch):
        MultiHeadAttention(8, 2)(torch.zeros(1, 2, 8), torch.zeros(1, 2, 6))


def test_attention_pool_singleton_and_identical_tokens():
    q = torch.rand(3, 5, dtype=D)
    x = torch.randn(1, 5, dtype=D)
    assert torch.allclose(attention_pool(x, q), x.expand(3, 5))
    same = x.expand(4, 5)
    assert torch.allclose(attention_pool(same, q), x.expand(3, 5))


def test_attention_pool_matches_formula():
    g = torch.Generator().manual_seed(2)
    x, q = torch.randn(6, 4, generator=g, dtype=D), torch.rand(2, 4, generator=g, dtype=D)
    z = attention_pool(x, q)
    for i in range(2):
        logits = np.array([float(q[i] @ x[j]) / math.sqrt(4) for j in range(6)])
        a = np.exp(logits) / np.exp(logits).sum()
        np.testing.assert_allclose(z[i].numpy(), (a[:, None] * x.numpy()).sum(0), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 5), st.integers(0, 2**16))
def test_attention_pool_padding_and_permutation(n, pad, seed):
    g = torch.Generator().manual_seed(seed)
    x, q = torch.randn(n, 6, generator=g), torch.rand(3, 6, generator=g)
    base = attention_pool(x, q)
    padded = torch.cat([x, torch.zeros(pad, 6)])
    mask = torch.arange(n + pad) < n
    assert torch.max(torch.abs(attention_pool(padded, q, mask) - base)) < 1e-6
    perm = torch.randperm(n, generator=g)
    assert torch.max(torch.abs(attention_pool(x[perm], q) - base)) < 1e-6


def test_attention_pool_errors():
    with pytest.raises(NoValidTokens):
        attention_pool(torch.zeros(2, 3, 4), torch.rand(2, 4), torch.tensor([[True, False, False], [False] * 3]))
    with pytest.raises(ShapeMismatch):
        attention_pool(torch.zeros(3, 4), torch.rand(2, 5))


def test_adamw_zero_gradient_no_decay_is_noop():
    p = torch.randn(4)
    before = p.clone()
    adamw_step([p], [torch.zeros(4)], AdamWState(lr=0.1))
    assert torch.equal(p, before)


def test_adamw_decay_factor():
    p = torch.ones(3, dtype=D)
    state = AdamWState(lr=0.01, weight_decay=0.5)
    adamw_step([p], [torch.zeros(3, dtype=D)], state)
    assert torch.allclose(p, torch.full((3,), 1 - 0.01 * 0.5, dtype=D))
    assert state.step == 1


def test_adamw_converges_on_quadratic():
    x = torch.zeros(1, dtype=D, requires_grad=True)
    opt = AdamW([x], lr=1e-2, betas=(0.9, 0.99))
    for _ in range(2000):
        opt.zero_grad()
        ((x - 3.0) ** 2).sum().backward()
        opt.step()
    assert abs(float(x.detach()) - 3.0) < 1e-3
    assert opt.step_count == 2000


def test_adamw_first_step_matches_hand_computation():
    p = torch.tensor([1.0], dtype=D)
    g = torch.tensor([0.5], dtype=D)
    state = AdamWState(lr=0.1, beta1=0.9, beta2=0.99, weight_decay=0.0, eps=1e-8)
    adamw_step([p], [g], state)
    m_hat = (0.1 * 0.5) / 0.1
    v_hat = (0.01 * 0.25) / 0.01
    assert float(p) == pytest.approx(1.0 - 0.1 * m_hat / (math.sqrt(v_hat) + 1e-8))


def test_adamw_rejects_non_finite():
    with pytest.raises(NonFiniteGradient):
        adamw_step([torch.zeros(2)], [torch.tensor([1.0, float("nan")])], AdamWState())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**16))
def test_adamw_keeps_params_finite(seed):
    g = torch.Generator().manual_seed(seed)
    p = torch.randn(5, generator=g) * 1e3
    state = AdamWState(lr=1.0, weight_decay=0.1)
    for _ in range(5):
        adamw_step([p], [torch.randn(5, generator=g) * 1e6], state)
    assert torch.all(torch.isfinite(p))


def test_checkpoint_round_trip(tmp_path):
    tensors = {"a.weight": torch.randn(3, 4), "b": torch.randn(2, dtype=D), "steps": torch.arange(3)}
    path = tmp_path / "x.ckpt"
    save_checkpoint(path, tensors, {"config_hash": "abc", "step": 7})
    loaded, meta = load_checkpoint(path)
    assert meta == {"config_hash": "abc", "step": 7}
    for k, v in tensors.items():
        assert loaded[k].dtype == v.dtype and torch.equal(loaded[k], v)
    raw = path.read_bytes()
    assert raw[:8] == b"MRCKPT01"


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_differentiable_fk_matches_numpy_fk():
    from helpers import random_motion, random_skeleton
    from motion_retarget.skeleton import forward_kinematics

    rng = np.random.default_rng(5)
    sk = random_skeleton(rng, 9)
    m = random_motion(rng, 9, frames=3)
    ours = kinematics.forward_kinematics(
        [int(p) for p in sk.parents], torch.tensor(sk.offsets), torch.tensor(m.rotations),
        torch.tensor(m.root_positions),
    )
    # the differentiable path adds a small epsilon to each normalisation
    np.testing.assert_allclose(ours.numpy(), forward_kinematics(sk, m), atol=1e-6)
