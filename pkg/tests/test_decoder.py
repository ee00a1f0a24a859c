import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import FINGERS_8, humanoid_16, mixamo_skeleton, motion_for, tiny_model_config
from motion_retarget.decoder import DecoderConfig, RetargetDecoder, renormalize_root
from motion_retarget.errors import ConfigMismatch, ZeroRootHeight
from motion_retarget.model import RetargetModel
from motion_retarget.skeleton import TPose, check_motion


def build(config=None, seed=0):
    torch.manual_seed(seed)
    model = RetargetModel(config or tiny_model_config())
    model.eval()
    return model


def representation(model, sk, seed=0, frames=8):
    with torch.no_grad():
        return model.encode(model.motion_batch([sk], [motion_for(sk, np.random.default_rng(seed), frames)]))


def test_input_is_seeded_and_target_specific():
    model = build()
    a, b = model.skeleton_batch([humanoid_16()]), model.skeleton_batch([mixamo_skeleton()])
    dec = model.decoder
    with torch.no_grad():
        x1 = dec.build_input(a, 5, torch.Generator().manual_seed(3))
        x2 = dec.build_input(a, 5, torch.Generator().manual_seed(3))
        x3 = dec.build_input(a, 5, torch.Generator().manual_seed(4))
        y = dec.build_input(b, 5, torch.Generator().manual_seed(3))
    assert all(torch.equal(p, q) for p, q in zip(x1, x2))
    assert not all(torch.equal(p, q) for p, q in zip(x1, x3))
    assert [g.shape for g in x1] == [(5, 1, s, 16) for s in a.groups.sizes]
    assert any(p.shape != q.shape or not torch.equal(p, q) for p, q in zip(x1, y))


def test_output_matches_target_joint_count():
    model = build()
    h = representation(model, mixamo_skeleton())
    for target in (humanoid_16(), mixamo_skeleton(), mixamo_skeleton(FINGERS_8)):
        tb = model.skeleton_batch([target])
        with torch.no_grad():
            out = model.decode(h, tb, seed=0)
        (result,) = model.to_outputs(out, tb)
        check_motion(target, result.motion)
        assert result.raw_features.shape == (8, target.n_joints, 16)
        assert np.all(np.isfinite(result.motion.rotations))


def test_decode_is_deterministic_for_a_seed():
    model = build()
    h = representation(model, mixamo_skeleton())
    tb = model.skeleton_batch([humanoid_16()])
    with torch.no_grad():
        a, b, c = (model.decode(h, tb, seed=s) for s in (5, 5, 6))
    assert torch.equal(a.rot6d, b.rot6d) and torch.equal(a.root, b.root)
    assert not torch.equal(a.rot6d, c.rot6d)


def test_output_depends_on_representation():
    model = build()
    h = representation(model, mixamo_skeleton())
    tb = model.skeleton_batch([mixamo_skeleton()])
    with torch.no_grad():
        a = model.decode(h, tb, seed=0)
        b = model.decode(torch.zeros_like(h), tb, seed=0)
    assert float(torch.max(torch.abs(a.rot6d - b.rot6d))) > 1e-4


@pytest.mark.parametrize("attention", ["full", "factorized"])
def test_target_padding_invariance(attention):
    model = build(tiny_model_config(attention=attention, layers=2))
    h = representation(model, mixamo_skeleton()).expand(-1, 2, -1, -1)
    targets = [humanoid_16(), mixamo_skeleton(FINGERS_8)]
    with torch.no_grad():
        a = model.decode(h, model.skeleton_batch(targets), seed=1)
        b = model.decode(h, model.skeleton_batch(targets, extra_padding=3), seed=1)
    assert float(torch.max(torch.abs(a.rot6d - b.rot6d))) < 1e-6
    assert float(torch.max(torch.abs(a.root - b.root))) < 1e-6
    ident = torch.tensor([1.0, 0, 0, 0, 1, 0], dtype=a.rot6d.dtype)
    assert torch.all(a.rot6d[:, 0, 16:] == ident)


def test_config_mismatch():
    model = build()
    tb = model.skeleton_batch([humanoid_16()])
    with pytest.raises(ConfigMismatch):
        model.decode(torch.zeros(4, 1, 12, 8, dtype=torch.float64), tb)
    with pytest.raises(ConfigMismatch):
        model.decode(torch.zeros(4, 2, 12, 16, dtype=torch.float64), tb)
    with pytest.raises(ValueError):
        DecoderConfig(noise_seed_policy="sometimes")


def _tpose(root_height):
    return TPose(np.zeros((1, 3)), root_height, 2.0 * root_height)


def test_renormalize_examples():
    traj = np.random.default_rng(0).normal(size=(6, 3))
    np.testing.assert_array_equal(renormalize_root(traj, _tpose(0.9), _tpose(0.9)), traj)
    np.testing.assert_allclose(renormalize_root(traj, _tpose(0.5), _tpose(1.0)), 2 * traj)
    with pytest.raises(ZeroRootHeight):
        renormalize_root(traj, _tpose(0.0), _tpose(1.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0.05, 5), st.integers(0, 2**16))
def test_renormalize_composes(a, b, c, seed):
    traj = np.random.default_rng(seed).normal(size=(4, 3))
    two_step = renormalize_root(renormalize_root(traj, _tpose(a), _tpose(b)), _tpose(b), _tpose(c))
    np.testing.assert_allclose(two_step, renormalize_root(traj, _tpose(a), _tpose(c)), rtol=1e-12)


def test_decoder_parameters_receive_gradient():
    model = build()
    model.train()
    sk = humanoid_16()
    h = representation(model, sk, frames=4)
    out = model.decode(h, model.skeleton_batch([sk]), seed=0)
    (out.rot6d.sum() + out.root.sum()).backward()
    grads = [p.grad for p in model.decoder.parameters()]
    assert all(g is not None for g in grads)
    assert sum(float(g.abs().sum()) for g in grads) > 0
    assert isinstance(model.decoder, RetargetDecoder)
