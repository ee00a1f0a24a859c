"""Losses, the retarget-and-back training step, the training loop and inference."""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import torch

from .decoder import renormalize_root
from .errors import NonFiniteLoss, ShapeMismatch, SkeletonMismatch, WindowTooShort
from .features import MotionBatch
from .model import ModelConfig, RetargetModel
from .nn.optim import AdamW
from .skeleton import Motion, Skeleton, check_motion
from .transforms import window_motion

log = logging.getLogger(__name__)

LOSS_COLUMNS = ("step", "l_rec", "l_cyc", "l_root", "l_total")
LR_SCHEDULES = ("constant", "cosine")


@dataclass(frozen=True)
class LossWeights:
    lambda_cyc: float = 20.0
    lambda_root: float = 7.0

    def __post_init__(self):
        if self.lambda_cyc < 0 or self.lambda_root < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class Ablations:
    share_joints: bool = True
    use_positions: bool = True
    joint_mask_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.joint_mask_prob < 1.0:
            raise ValueError("joint_mask_prob must lie in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    window_length: int = 64
    window_stride: int = 16
    lr: float = 1e-4
    betas: tuple = (0.9, 0.99)
    weight_decay: float = 0.0
    eps: float = 1e-8
    steps: int = 1000
    seed: int = 0
    ablations: Ablations = field(default_factory=Ablations)
    weights: LossWeights = field(default_factory=LossWeights)
    p_other_skeleton: float = 0.8
    lr_schedule: str = "constant"
    warmup_steps: int = 0
    stop_grad_cycle: bool = False
    micro_batch: int = 0
    checkpoint_every: int = 500
    validate_every: int = 0
    early_stop_l_rec: Optional[float] = None
    early_stop_window: int = 50
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.window_length < 2:
            raise ValueError("window_length must be >= 2")
        if self.batch_size < 1 or self.steps < 0 or self.window_stride < 1 or self.micro_batch < 0:
            raise ValueError("batch_size and window_stride must be positive, steps non-negative")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if not 0.0 <= self.p_other_skeleton <= 1.0:
            raise ValueError("p_other_skeleton must lie in [0, 1]")
        object.__setattr__(self, "betas", tuple(self.betas))
        m = self.model
        if m.share_joints != self.ablations.share_joints or m.use_positions != self.ablations.use_positions \
                or m.window_length != self.window_length:
            object.__setattr__(self, "model", replace(
                m,
                share_joints=self.ablations.share_joints,
                use_positions=self.ablations.use_positions,
                window_length=self.window_length,
            ))

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        ablations = Ablations(**d.pop("ablations", {}))
        weights = LossWeights(**d.pop("weights", {}))
        model = ModelConfig.from_dict(d.pop("model", {}))
        return cls(ablations=ablations, weights=weights, model=model, **d)

    def with_ablation(self, **changes):
        return replace(self, ablations=replace(self.ablations, **changes))


# -- losses ---------------------------------------------------------------

@dataclass
class LossTerms:
    """Sums and entry counts of the three losses, so micro-batches combine exactly."""

    rec_sum: torch.Tensor
    rec_count: float
    cyc_sum: torch.Tensor
    cyc_count: float
    root_pos_sum: torch.Tensor
    root_pos_count: float
    root_rot_sum: torch.Tensor
    root_rot_count: float

    def combine(self, weights: "LossWeights", totals=None):
        """Weighted total with each sum divided by the (batch-wide) count in ``totals``."""
        t = totals or self
        l_rec = self.rec_sum / t.rec_count
        l_cyc = self.cyc_sum / t.cyc_count
        l_root = self.root_pos_sum / t.root_pos_count + self.root_rot_sum / t.root_rot_count
        return l_rec, l_cyc, l_root, total_loss(l_rec, l_cyc, l_root, weights)


def _check_same(what, a, b):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what} differ in shape: {tuple(a.shape)} vs {tuple(b.shape)}")


def reconstruction_sum(root_a, rot_a, root_b, rot_b, joint_mask=None):
    """Squared-error sum and entry count over root position, root 6D and non-root 6D."""
    _check_same("root tensors", root_a, root_b)
    _check_same("rotation tensors", rot_a, rot_b)
    sq_rot = (rot_a - rot_b) ** 2
    count = float(root_a.numel())
    if joint_mask is None:
        count += sq_rot.numel()
    else:
        m = joint_mask.view(1, *joint_mask.shape, 1).to(sq_rot.dtype)
        sq_rot = sq_rot * m
        count += float(m.sum()) * rot_a.shape[0] * 6
    return ((root_a - root_b) ** 2).sum() + sq_rot.sum(), count


def reconstruction_error(root_a, rot_a, root_b, rot_b, joint_mask=None):
    """Mean squared error over root position, root 6D and non-root 6D entries.

    ``root_*``: (T, B, 3); ``rot_*``: (T, B, N, 6); ``joint_mask``: (B, N)
    marks real joints, so padded joints contribute nothing to the mean.
    """
    total, count = reconstruction_sum(root_a, rot_a, root_b, rot_b, joint_mask)
    return total / count


def cycle_error(h_a, h_b):
    _check_same("representations", h_a, h_b)
    return ((h_a - h_b) ** 2).mean()


def root_error(root_a, rot_a, root_b, rot_b):
    """MSE over root positions plus MSE over root 6D rotations."""
    _check_same("root tensors", root_a, root_b)
    _check_same("rotation tensors", rot_a, rot_b)
    return ((root_a - root_b) ** 2).mean() + ((rot_a[..., 0, :] - rot_b[..., 0, :]) ** 2).mean()


def _check_pair(m_a: Motion, m_b: Motion):
    if m_a.rotations.shape != m_b.rotations.shape:
        raise SkeletonMismatch(
            f"motions are not on the same skeleton/frames: {m_a.rotations.shape} vs {m_b.rotations.shape}"
        )


def _as_tensors(m: Motion, root_height):
    root = torch.from_numpy(m.root_positions / root_height)
    return root, torch.from_numpy(m.rotations)


def loss_reconstruction(m_a: Motion, m_a_prime: Motion, root_height: float = 1.0) -> float:
    """Motion-level reconstruction loss; root positions are divided by ``root_height``."""
    _check_pair(m_a, m_a_prime)
    return float(reconstruction_error(*_as_tensors(m_a, root_height), *_as_tensors(m_a_prime, root_height)))


def loss_cycle(h_a, h_b) -> float:
    return float(cycle_error(torch.as_tensor(h_a), torch.as_tensor(h_b)))


def loss_root(m_a: Motion, m_a_prime: Motion, root_height: float = 1.0) -> float:
    _check_pair(m_a, m_a_prime)
    return float(root_error(*_as_tensors(m_a, root_height), *_as_tensors(m_a_prime, root_height)))


def total_loss(l_rec, l_cyc, l_root, weights: LossWeights):
    return l_rec + weights.lambda_cyc * l_cyc + weights.lambda_root * l_root


# -- sampling -------------------------------------------------------------

@dataclass
class TrainBatch:
    sources: list
    windows: list
    targets: list


class PairSampler:
    """Draws (source skeleton, window, target skeleton) triples.

    Sources are uniform over skeletons, then over that skeleton's windows.
    The target is a different skeleton with probability ``p_other`` (uniform
    over the rest of the pool), otherwise the source itself.
    """

    def __init__(self, pool: Sequence, window_length: int, stride: int, p_other: float, seed: int):
        by_skeleton = {}
        for skeleton, motion in pool:
            wins = window_motion(motion, window_length, stride)
            if wins:
                by_skeleton.setdefault(skeleton, []).extend(wins)
        if not by_skeleton:
            raise WindowTooShort(f"no training motion is at least {window_length} frames long")
        self.skeletons = list(by_skeleton)
        self.windows = [by_skeleton[s] for s in self.skeletons]
        self.p_other = p_other
        self.rng = np.random.default_rng(seed)

    def sample(self, batch_size) -> TrainBatch:
        sources, windows, targets = [], [], []
        n = len(self.skeletons)
        for _ in range(batch_size):
            s = int(self.rng.integers(n))
            w = int(self.rng.integers(len(self.windows[s])))
            t = s
            if n > 1 and self.rng.random() < self.p_other:
                t = int(self.rng.integers(n - 1))
                t += t >= s
            sources.append(self.skeletons[s])
            windows.append(self.windows[s][w])
            targets.append(self.skeletons[t])
        return TrainBatch(sources, windows, targets)


# -- training step --------------------------------------------------------

@dataclass
class LossReport:
    step: int
    l_rec: float
    l_cyc: float
    l_root: float
    l_total: float

    def row(self):
        return [self.step, repr(self.l_rec), repr(self.l_cyc), repr(self.l_root), repr(self.l_total)]


def loss_terms(model: RetargetModel, batch: TrainBatch, config: TrainConfig, generator=None) -> LossTerms:
    """Forward pass of the retarget-and-back cycle for one (micro-)batch."""
    p_mask = config.ablations.joint_mask_prob if model.training else 0.0
    source = model.motion_batch(batch.sources, batch.windows)
    targets = model.skeleton_batch(batch.targets)
    h_a = model.encode(source, p_mask, generator)
    rec = model.decode(h_a, source.skeletons, generator=generator)
    ret = model.decode(h_a, targets, generator=generator)
    # root stays in source-normalised units, which equal target-normalised ones
    h_b = model.encode(MotionBatch(targets, ret.root, ret.rot6d, source.fps), p_mask, generator)
    rec_sum, rec_count = reconstruction_sum(
        rec.root, rec.rot6d, source.root, source.rot6d, source.skeletons.groups.joint_mask
    )
    h_ref = h_a.detach() if config.stop_grad_cycle else h_a
    return LossTerms(
        rec_sum, rec_count,
        ((h_ref - h_b) ** 2).sum(), float(h_b.numel()),
        ((rec.root - source.root) ** 2).sum(), float(rec.root.numel()),
        ((rec.rot6d[:, :, 0] - source.rot6d[:, :, 0]) ** 2).sum(), float(rec.root.shape[0] * rec.root.shape[1] * 6),
    )


def compute_losses(model: RetargetModel, batch: TrainBatch, config: TrainConfig, generator=None):
    """``(l_rec, l_cyc, l_root, l_total)`` tensors for a whole batch."""
    return loss_terms(model, batch, config, generator).combine(config.weights)


def _chunks(batch: TrainBatch, size):
    n = len(batch.sources)
    size = size or n
    for i in range(0, n, size):
        yield TrainBatch(batch.sources[i:i + size], batch.windows[i:i + size], batch.targets[i:i + size])


def _batch_counts(model, batch: TrainBatch, config: TrainConfig):
    """Entry counts for the whole batch, used to normalise every micro-batch."""
    t = config.window_length
    b = len(batch.sources)
    joints = sum(model.context(s).n_joints for s in batch.sources)
    tokens = config.model.encoder.tokens * config.model.encoder.d_model
    return LossTerms(None, float(t * (3 * b + 6 * joints)), None, float(t * b * tokens),
                     None, float(t * b * 3), None, float(t * b * 6))


def train_step(model, optimizer, batch: TrainBatch, config: TrainConfig, step: int, generator=None) -> LossReport:
    """One optimisation step; micro-batches accumulate gradients of the exact batch loss."""
    model.train()
    optimizer.zero_grad(set_to_none=True)
    totals = _batch_counts(model, batch, config)
    sums = np.zeros(4)
    for chunk in _chunks(batch, config.micro_batch):
        parts = loss_terms(model, chunk, config, generator).combine(config.weights, totals)
        values = np.array([float(p.detach()) for p in parts])
        if not np.all(np.isfinite(values)):
            raise NonFiniteLoss(
                f"step {step}: non-finite loss (l_rec={values[0]}, l_cyc={values[1]}, l_root={values[2]})"
            )
        parts[3].backward()
        sums += values
    optimizer.step()
    return LossReport(step, *[float(v) for v in sums])


def learning_rate(config: TrainConfig, step: int) -> float:
    """Linear warmup, then constant or cosine decay to zero at ``config.steps``."""
    if config.warmup_steps and step < config.warmup_steps:
        return config.lr * (step + 1) / config.warmup_steps
    if config.lr_schedule == "cosine" and config.steps > config.warmup_steps:
        progress = (step - config.warmup_steps) / (config.steps - config.warmup_steps)
        return config.lr * 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))
    return config.lr


def seed_everything(seed: int):
    torch.manual_seed(seed)
    np.random.seed(seed % 2**32)


class Trainer:
    """Runs ``config.steps`` training steps on a pool of (skeleton, motion) pairs.

    With ``out_dir`` set, writes ``loss.csv``, ``step_XXXXXX.ckpt`` every
    ``checkpoint_every`` steps, ``last.ckpt`` and (when validation data is
    given) ``best.ckpt`` by validation reconstruction loss.
    """

    def __init__(self, config: TrainConfig, pool, validation=None, out_dir=None, provider=None, keyword_table=None):
        self.config = config
        seed_everything(config.seed)
        self.model = RetargetModel(config.model, provider, keyword_table)
        self.optimizer = AdamW(
            self.model.parameters(), lr=config.lr, betas=config.betas, eps=config.eps, weight_decay=config.weight_decay
        )
        self.sampler = PairSampler(pool, config.window_length, config.window_stride, config.p_other_skeleton, config.seed)
        self.generator = torch.Generator().manual_seed(config.seed)
        self.validation = list(validation or [])
        self.out_dir = out_dir
        self.history = []
        self.best = math.inf
        self.step = 0
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)

    @property
    def loss_path(self):
        return os.path.join(self.out_dir, "loss.csv") if self.out_dir else None

    def validate(self) -> float:
        """Mean reconstruction loss on the validation pairs (eval mode, fixed noise)."""
        self.model.eval()
        losses = []
        with torch.no_grad():
            for skeleton, motion in self.validation:
                wins = window_motion(motion, self.config.window_length, self.config.window_length)
                if not wins:
                    continue
                batch = TrainBatch([skeleton] * len(wins), wins, [skeleton] * len(wins))
                gen = torch.Generator().manual_seed(self.config.seed)
                losses.append(float(compute_losses(self.model, batch, self.config, gen)[0]))
        self.model.train()
        return float(np.mean(losses)) if losses else math.nan

    def save(self, name, **extra):
        path = os.path.join(self.out_dir, name)
        self.model.save(path, step=self.step, train_config=self.config.to_dict(), **extra)
        return path

    def run(self, steps=None, callback=None):
        steps = self.config.steps if steps is None else steps
        writer = fh = None
        if self.out_dir:
            fh = open(self.loss_path, "w", newline="")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(LOSS_COLUMNS)
        recent = []
        try:
            for _ in range(steps):
                for group in self.optimizer.param_groups:
                    group["lr"] = learning_rate(self.config, self.step)
                batch = self.sampler.sample(self.config.batch_size)
                report = train_step(self.model, self.optimizer, batch, self.config, self.step, self.generator)
                self.history.append(report)
                self.step += 1
                if writer:
                    writer.writerow(report.row())
                if callback:
                    callback(report)
                if self.out_dir and self.config.checkpoint_every and self.step % self.config.checkpoint_every == 0:
                    self.save(f"step_{self.step:06d}.ckpt")
                if self.validation and self.config.validate_every and self.step % self.config.validate_every == 0:
                    self._maybe_best()
                recent.append(report.l_rec)
                recent = recent[-self.config.early_stop_window:]
                if (
                    self.config.early_stop_l_rec is not None
                    and len(recent) == self.config.early_stop_window
                    and float(np.mean(recent)) < self.config.early_stop_l_rec
                ):
                    log.info("early stop at step %d (mean l_rec %.3g)", self.step, float(np.mean(recent)))
                    break
        finally:
            if fh:
                fh.close()
        if self.out_dir:
            if self.validation:
                self._maybe_best()
            self.save("last.ckpt")
        return self.history

    def _maybe_best(self):
        score = self.validate()
        if self.out_dir and score < self.best:
            self.best = score
            self.save("best.ckpt", validation_l_rec=score)


def read_loss_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "step" else float(v)) for k, v in r.items()} for r in rows]


# -- inference ------------------------------------------------------------

def _window_starts(frames, length):
    if frames < length:
        raise WindowTooShort(f"motion has {frames} frames, shorter than the {length}-frame window")
    starts = list(range(0, frames - length + 1, length))
    if starts[-1] + length < frames:
        starts.append(frames - length)
    return starts


def retarget(source_skeleton: Skeleton, source_motion: Motion, target_skeleton: Skeleton, model, seed: int = 0,
             window_length: Optional[int] = None) -> Motion:
    """Retarget a motion onto another skeleton with a trained model (or checkpoint path).

    The motion is cut into non-overlapping windows (the last one aligned to
    the end when the length is not a multiple), each window is encoded and
    decoded independently with fixed-seed noise, and the pieces are
    concatenated. Root trajectories are rescaled by the root-height ratio.
    """
    if isinstance(model, (str, os.PathLike)):
        model = RetargetModel.load(model)
    check_motion(source_skeleton, source_motion)
    length = window_length or model.config.window_length
    starts = _window_starts(source_motion.frame_count, length)
    windows, offsets = [], []
    for s in starts:
        w = source_motion.slice(s, s + length)
        root = w.root_positions.copy()
        offset = np.zeros(3)
        offset[[0, 2]] = root[0, [0, 2]]
        windows.append(Motion(root - offset, w.rotations, w.fps))
        offsets.append(offset)
    src_ctx, tgt_ctx = model.context(source_skeleton), model.context(target_skeleton)
    model.eval()
    with torch.no_grad():
        batch = model.motion_batch([source_skeleton] * len(windows), windows)
        h = model.encode(batch)
        targets = model.skeleton_batch([target_skeleton] * len(windows))
        out = model.decode(h, targets, seed=seed)
        # decoded roots are source-normalised: scale to source units, then renormalise
        pieces = model.to_outputs(out, targets, source_motion.fps, root_scale=[src_ctx.root_height] * len(windows))
    roots, rots = [], []
    covered = 0
    for s, offset, piece in zip(starts, offsets, pieces):
        m = piece.motion
        root = renormalize_root(m.root_positions + offset, src_ctx.tpose, tgt_ctx.tpose)
        keep = slice(covered - s, length)
        roots.append(root[keep])
        rots.append(m.rotations[keep])
        covered = s + length
    return Motion(np.concatenate(roots), np.concatenate(rots), source_motion.fps)
