"""scikit-learn style front end: ``fit`` on (skeleton, motion) pairs, ``transform`` onto a target."""
from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .errors import InvalidMotion, InvalidSkeleton
from .model import ModelConfig, RetargetModel
from .skeleton import Motion, Skeleton, check_motion, compute_tpose, forward_kinematics, height_normalized_mse
from .training import Ablations, LossWeights, Trainer, TrainConfig, retarget
from .transforms import window_motion


def check_skeleton(skeleton) -> Skeleton:
    if not isinstance(skeleton, Skeleton):
        raise InvalidSkeleton(f"expected a Skeleton, got {type(skeleton).__name__}")
    return skeleton


def check_pairs(X, min_frames=1):
    """Validate a sequence of ``(Skeleton, Motion)`` pairs and return it as a list."""
    if isinstance(X, tuple) and len(X) == 2 and isinstance(X[0], Skeleton):
        X = [X]
    pairs = list(X)
    if not pairs:
        raise ValueError("expected at least one (skeleton, motion) pair")
    for k, pair in enumerate(pairs):
        if not (isinstance(pair, (tuple, list)) and len(pair) == 2):
            raise ValueError(f"item {k} is not a (skeleton, motion) pair")
        skeleton, motion = pair
        check_skeleton(skeleton)
        if not isinstance(motion, Motion):
            raise InvalidMotion(f"item {k}: expected a Motion, got {type(motion).__name__}")
        check_motion(skeleton, motion)
        if motion.frame_count < min_frames:
            raise InvalidMotion(f"item {k}: motion has {motion.frame_count} frames, need >= {min_frames}")
    return [tuple(p) for p in pairs]


class MotionRetargeter(TransformerMixin, BaseEstimator):
    """Trains the encoder/decoder pair and retargets motions between skeletons.

    ``X`` is a list of ``(Skeleton, Motion)`` pairs. ``transform(X, target)``
    returns one Motion on ``target`` per input pair.
    """

    def __init__(self, d_model=64, pool_queries=4, encoder_layers=4, decoder_layers=4, heads=4, ff_mult=4,
                 dropout=0.1, attention="full", name_dim=64, batch_size=16, window_length=64, window_stride=16,
                 lr=1e-4, betas=(0.9, 0.99), weight_decay=0.0, steps=1000, warmup_steps=0, micro_batch=0,
                 share_joints=True, use_positions=True, joint_mask_prob=0.0, lambda_cyc=20.0, lambda_root=7.0,
                 random_state=0):
        self.d_model = d_model
        self.pool_queries = pool_queries
        self.encoder_layers = encoder_layers
        self.decoder_layers = decoder_layers
        self.heads = heads
        self.ff_mult = ff_mult
        self.dropout = dropout
        self.attention = attention
        self.name_dim = name_dim
        self.batch_size = batch_size
        self.window_length = window_length
        self.window_stride = window_stride
        self.lr = lr
        self.betas = betas
        self.weight_decay = weight_decay
        self.steps = steps
        self.warmup_steps = warmup_steps
        self.micro_batch = micro_batch
        self.share_joints = share_joints
        self.use_positions = use_positions
        self.joint_mask_prob = joint_mask_prob
        self.lambda_cyc = lambda_cyc
        self.lambda_root = lambda_root
        self.random_state = random_state

    def to_config(self) -> TrainConfig:
        enc = EncoderConfig(self.d_model, self.pool_queries, self.encoder_layers, self.heads, self.ff_mult,
                            self.dropout, self.attention, self.name_dim)
        dec = DecoderConfig(self.d_model, self.decoder_layers, self.heads, self.ff_mult, self.dropout,
                            self.attention, self.name_dim)
        model = ModelConfig(enc, dec, name_provider={"kind": "lexical", "dim": self.name_dim, "seed": 0})
        return TrainConfig(
            batch_size=self.batch_size, window_length=self.window_length, window_stride=self.window_stride,
            lr=self.lr, betas=tuple(self.betas), weight_decay=self.weight_decay, steps=self.steps,
            seed=int(self.random_state), warmup_steps=self.warmup_steps, micro_batch=self.micro_batch,
            ablations=Ablations(self.share_joints, self.use_positions, self.joint_mask_prob),
            weights=LossWeights(self.lambda_cyc, self.lambda_root), model=model,
        )

    def fit(self, X, y=None):
        pairs = check_pairs(X, min_frames=self.window_length)
        trainer = Trainer(self.to_config(), pairs)
        self.history_ = trainer.run()
        self.model_ = trainer.model
        self.n_skeletons_ = len({s for s, _ in pairs})
        self.n_steps_ = trainer.step
        return self

    def transform(self, X, target=None, seed=0):
        check_is_fitted(self, "model_")
        pairs = check_pairs(X)
        out = []
        for skeleton, motion in pairs:
            tgt = skeleton if target is None else check_skeleton(target)
            out.append(retarget(skeleton, motion, tgt, self.model_, seed=seed))
        return out

    def predict(self, X, target=None, seed=0):
        return self.transform(X, target, seed)

    def encode(self, X):
        """Motion representations, one ``(windows, T, 6m, D)`` array per pair."""
        check_is_fitted(self, "model_")
        reps = []
        self.model_.eval()
        with torch.no_grad():
            for skeleton, motion in check_pairs(X, min_frames=self.window_length):
                wins = window_motion(motion, self.window_length, self.window_length)
                h = self.model_.encode(self.model_.motion_batch([skeleton] * len(wins), wins))
                reps.append(h.permute(1, 0, 2, 3).double().numpy())
        return reps

    def score(self, X, y=None):
        """Negative mean height-normalised MSE of self-retargeting (higher is better)."""
        errors = []
        for (skeleton, motion), pred in zip(check_pairs(X), self.transform(X)):
            height = compute_tpose(skeleton).character_height
            errors.append(height_normalized_mse(forward_kinematics(skeleton, pred),
                                                forward_kinematics(skeleton, motion), height))
        return -float(np.mean(errors))

    def save(self, path):
        check_is_fitted(self, "model_")
        self.model_.save(path, estimator_params=_jsonable(self.get_params()))

    @classmethod
    def load(cls, path):
        model = RetargetModel.load(path)
        params = model.checkpoint_metadata.get("estimator_params", {})
        est = cls(**{k: tuple(v) if k == "betas" else v for k, v in params.items()})
        est.model_ = model
        return est


def _jsonable(params):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}
