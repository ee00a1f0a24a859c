"""Skeleton-agnostic motion retargeting with body-part grouping, attention pooling and cycle training."""
from .bvh import BvhDocument, parse_bvh, write_bvh
from .decoder import DecoderConfig, RetargetDecoder, renormalize_root
from .embeddings import LexicalNameEmbedder, TableNameEmbedder, sinusoidal_pe
from .encoder import EncoderConfig, MotionEncoder
from .estimator import MotionRetargeter, check_pairs, check_skeleton
from .evaluation import EvalReport, evaluate, run_ablation_matrix
from .grouping import PartGrouping, classify_joints
from .model import ModelConfig, RetargetModel, RetargetOutput
from .skeleton import JointSpec, Motion, Skeleton, TPose, compute_tpose, forward_kinematics, height_normalized_mse
from .training import LossWeights, TrainConfig, Trainer, retarget
from .transforms import eliminate_joints_by_identifier, merge_joint_chain, split_joint, window_motion

__all__ = [
    "BvhDocument",
    "DecoderConfig",
    "EncoderConfig",
    "EvalReport",
    "JointSpec",
    "LexicalNameEmbedder",
    "LossWeights",
    "ModelConfig",
    "Motion",
    "MotionEncoder",
    "MotionRetargeter",
    "PartGrouping",
    "RetargetDecoder",
    "RetargetModel",
    "RetargetOutput",
    "Skeleton",
    "TPose",
    "TableNameEmbedder",
    "TrainConfig",
    "Trainer",
    "check_pairs",
    "check_skeleton",
    "classify_joints",
    "compute_tpose",
    "eliminate_joints_by_identifier",
    "evaluate",
    "forward_kinematics",
    "height_normalized_mse",
    "merge_joint_chain",
    "parse_bvh",
    "renormalize_root",
    "retarget",
    "run_ablation_matrix",
    "sinusoidal_pe",
    "split_joint",
    "window_motion",
    "write_bvh",
]
