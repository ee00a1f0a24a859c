import dataclasses

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import humanoid_16, mixamo_skeleton, motion_for, random_motion, tiny_model_config
from motion_retarget.errors import NonFiniteLoss, ShapeMismatch, SkeletonMismatch, WindowTooShort
from motion_retarget.model import RetargetModel
from motion_retarget.skeleton import Motion, check_motion
from motion_retarget.training import (
    LossTerms,
    LossWeights,
    PairSampler,
    TrainBatch,
    TrainConfig,
    Trainer,
    _batch_counts,
    _window_starts,
    compute_losses,
    learning_rate,
    loss_cycle,
    loss_reconstruction,
    loss_root,
    loss_terms,
    read_loss_csv,
    retarget,
    train_step,
)
from motion_retarget.nn import AdamW


def shifted(m, root=0.0, rot=0.0):
    return Motion(m.root_positions + root, m.rotations + rot, m.fps)


def test_reconstruction_closed_forms(rng):
    m = random_motion(rng, 5, frames=6)
    assert loss_reconstruction(m, m) == 0.0
    assert loss_reconstruction(m, shifted(m, 0.1, 0.1)) == pytest.approx(0.01)
    other = random_motion(rng, 5, frames=6)
    assert loss_reconstruction(m, other) == loss_reconstruction(other, m)
    with pytest.raises(SkeletonMismatch):
        loss_reconstruction(m, random_motion(rng, 4, frames=6))


def test_reconstruction_counts_root_and_rotations(rng):
    m = random_motion(rng, 3, frames=2)
    # root shifted by 1 on x only: 2 frames x 1 coordinate out of 2 * (3 + 18) entries
    assert loss_reconstruction(m, shifted(m, np.array([1.0, 0, 0]))) == pytest.approx(2 / 42)


def test_cycle_closed_forms():
    h = torch.randn(3, 2, 4, 8)
    assert loss_cycle(h, h) == 0.0
    assert loss_cycle(h, h + 0.5) == pytest.approx(0.25)
    with pytest.raises(ShapeMismatch):
        loss_cycle(h, h[:, :1])


def test_root_closed_forms(rng):
    m = random_motion(rng, 4, frames=5)
    assert loss_root(m, m) == 0.0
    assert loss_root(m, shifted(m, np.array([1.0, 0, 0]))) == pytest.approx(1 / 3)
    rot = m.rotations.copy()
    rot[:, 1:] = random_motion(rng, 4, frames=5).rotations[:, 1:]
    assert loss_root(m, Motion(m.root_positions, rot)) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**16), st.floats(0, 50), st.floats(0, 50))
def test_losses_non_negative_and_weighted(seed, lc, lr_):
    rng = np.random.default_rng(seed)
    a, b = random_motion(rng, 3, frames=3), random_motion(rng, 3, frames=3)
    rec, root = loss_reconstruction(a, b), loss_root(a, b)
    assert rec >= 0 and root >= 0
    from motion_retarget.training import total_loss

    assert total_loss(rec, 0.3, root, LossWeights(lc, lr_)) == pytest.approx(rec + lc * 0.3 + lr_ * root)


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        LossWeights(-1.0, 0.0)


def tiny_setup(seed=0, **config_changes):
    torch.manual_seed(seed)
    settings_ = dict(batch_size=4, window_length=8, window_stride=4, lr=1e-3, steps=3, seed=seed,
                     checkpoint_every=0, model=tiny_model_config())
    config = TrainConfig(**{**settings_, **config_changes})
    rng = np.random.default_rng(seed)
    pool = [(humanoid_16(), motion_for(humanoid_16(), rng, frames=16)),
            (mixamo_skeleton(), motion_for(mixamo_skeleton(), rng, frames=16))]
    return config, pool


def test_zero_weights_give_reconstruction_only():
    config, pool = tiny_setup(weights=LossWeights(0.0, 0.0))
    model = RetargetModel(config.model)
    batch = PairSampler(pool, 8, 4, 0.8, 0).sample(4)
    l_rec, l_cyc, l_root, l_total = compute_losses(model, batch, config, torch.Generator().manual_seed(0))
    assert l_total.item() == l_rec.item()
    assert l_cyc.item() > 0 and l_root.item() > 0


def test_same_skeleton_cycle_term():
    config, pool = tiny_setup()
    model = RetargetModel(config.model)
    sk, m = pool[0]
    batch = TrainBatch([sk, sk], [m.slice(0, 8), m.slice(8, 16)], [sk, sk])
    losses = compute_losses(model, batch, config, torch.Generator().manual_seed(0))
    assert all(np.isfinite(x.item()) for x in losses)


def test_batch_counts_match_loss_terms():
    config, pool = tiny_setup()
    model = RetargetModel(config.model)
    batch = PairSampler(pool, 8, 4, 0.8, 0).sample(4)
    terms = loss_terms(model, batch, config, torch.Generator().manual_seed(0))
    counts = _batch_counts(model, batch, config)
    for name in ("rec_count", "cyc_count", "root_pos_count", "root_rot_count"):
        assert getattr(terms, name) == getattr(counts, name)


def test_micro_batches_combine_exactly():
    config, pool = tiny_setup()
    model = RetargetModel(config.model)
    batch = PairSampler(pool, 8, 4, 0.8, 0).sample(4)
    totals = _batch_counts(model, batch, config)
    halves = [TrainBatch(batch.sources[i:i + 2], batch.windows[i:i + 2], batch.targets[i:i + 2]) for i in (0, 2)]
    parts = [loss_terms(model, h, config, torch.Generator().manual_seed(k)) for k, h in enumerate(halves)]
    merged = LossTerms(*[
        parts[0].__dict__[f.name] + parts[1].__dict__[f.name] for f in dataclasses.fields(LossTerms)
    ])
    whole = merged.combine(config.weights)
    pieces = [p.combine(config.weights, totals) for p in parts]
    for k in range(4):
        assert whole[k].item() == pytest.approx((pieces[0][k] + pieces[1][k]).item(), rel=1e-12)


def test_train_step_updates_parameters():
    config, pool = tiny_setup()
    model = RetargetModel(config.model)
    opt = AdamW(model.parameters(), lr=1e-3)
    before = [p.detach().clone() for p in model.parameters()]
    batch = PairSampler(pool, 8, 4, 0.8, 0).sample(4)
    report = train_step(model, opt, batch, config, 0, torch.Generator().manual_seed(0))
    assert opt.step_count == 1 and report.step == 0
    assert report.l_total == pytest.approx(report.l_rec + 20 * report.l_cyc + 7 * report.l_root)
    changed = sum(not torch.equal(a, b) for a, b in zip(before, model.parameters()))
    assert changed > len(before) // 2


def test_non_finite_loss_aborts():
    config, pool = tiny_setup()
    model = RetargetModel(config.model)
    with torch.no_grad():
        model.decoder.root_head.bias.fill_(float("nan"))
    batch = PairSampler(pool, 8, 4, 0.8, 0).sample(2)
    with pytest.raises(NonFiniteLoss):
        train_step(model, AdamW(model.parameters()), batch, config, 0)


def test_sampler_target_policy():
    _, pool = tiny_setup()
    always = PairSampler(pool, 8, 4, 1.0, 0).sample(20)
    assert all(s is not t for s, t in zip(always.sources, always.targets))
    never = PairSampler(pool, 8, 4, 0.0, 0).sample(20)
    assert all(s is t for s, t in zip(never.sources, never.targets))
    assert all(w.frame_count == 8 and w.root_positions[0, 0] == 0 for w in never.windows)
    with pytest.raises(WindowTooShort):
        PairSampler(pool, 64, 16, 0.8, 0)


def test_learning_rate_schedule():
    config = TrainConfig(lr=1.0, steps=110, warmup_steps=10, lr_schedule="cosine")
    assert learning_rate(config, 0) == pytest.approx(0.1)
    assert learning_rate(config, 9) == pytest.approx(1.0)
    assert learning_rate(config, 60) == pytest.approx(0.5)
    assert learning_rate(config, 110) == pytest.approx(0.0, abs=1e-12)
    assert learning_rate(TrainConfig(lr=0.3), 500) == 0.3


def test_training_is_deterministic(tmp_path):
    config, pool = tiny_setup(seed=4)
    a = Trainer(config, pool, out_dir=tmp_path / "a").run()
    config, pool = tiny_setup(seed=4)
    b = Trainer(config, pool, out_dir=tmp_path / "b").run()
    assert [r.row() for r in a] == [r.row() for r in b]
    assert (tmp_path / "a" / "loss.csv").read_bytes() == (tmp_path / "b" / "loss.csv").read_bytes()
    rows = read_loss_csv(tmp_path / "a" / "loss.csv")
    assert [r["step"] for r in rows] == [0, 1, 2] and rows[0]["l_total"] == a[0].l_total
    assert (tmp_path / "a" / "last.ckpt").exists()


def test_trainer_checkpoints_and_best(tmp_path):
    config, pool = tiny_setup(checkpoint_every=2, validate_every=1)
    trainer = Trainer(config, pool, validation=pool[:1], out_dir=tmp_path)
    trainer.run(4)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["best.ckpt", "last.ckpt", "loss.csv", "step_000002.ckpt", "step_000004.ckpt"]
    loaded = RetargetModel.load(tmp_path / "best.ckpt")
    assert loaded.checkpoint_metadata["validation_l_rec"] == trainer.best


def test_window_starts():
    assert _window_starts(64, 64) == [0]
    assert _window_starts(128, 64) == [0, 64]
    assert _window_starts(100, 64) == [0, 36]
    with pytest.raises(WindowTooShort):
        _window_starts(63, 64)


@pytest.mark.parametrize("frames", [8, 13, 24])
def test_retarget_preserves_frames_and_target_joints(frames):
    torch.manual_seed(0)
    model = RetargetModel(tiny_model_config())
    src, tgt = mixamo_skeleton(), humanoid_16()
    m = motion_for(src, np.random.default_rng(frames), frames=frames)
    out = retarget(src, m, tgt, model)
    check_motion(tgt, out)
    assert out.frame_count == frames and out.fps == m.fps
    again = retarget(src, m, tgt, model)
    assert np.array_equal(out.rotations, again.rotations)
    with pytest.raises(WindowTooShort):
        retarget(src, m.slice(0, 7), tgt, model)


def test_retarget_from_checkpoint_path(tmp_path):
    torch.manual_seed(0)
    model = RetargetModel(tiny_model_config())
    model.save(tmp_path / "m.ckpt")
    src = mixamo_skeleton()
    m = motion_for(src, np.random.default_rng(0), frames=8)
    a = retarget(src, m, src, model)
    b = retarget(src, m, src, str(tmp_path / "m.ckpt"))
    assert np.array_equal(a.rotations, b.rotations) and np.array_equal(a.root_positions, b.root_positions)
