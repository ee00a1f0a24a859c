"""JSON config files for ``train``, ``synth`` and ``ablate``, validated with JSON Schema."""
from __future__ import annotations

import json

import jsonschema

from .synth import SYNTH_CONFIG_SCHEMA, SynthConfig
from .training import TrainConfig

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_BOOL = {"type": "boolean"}

ENCODER_SCHEMA = {
    "type": "object",
    "properties": {
        "d_model": {"type": "integer", "minimum": 2}, "pool_queries": {"type": "integer", "minimum": 1},
        "layers": {"type": "integer", "minimum": 0}, "heads": {"type": "integer", "minimum": 1},
        "ff_mult": {"type": "integer", "minimum": 1}, "dropout": {"type": "number", "minimum": 0, "maximum": 1},
        "attention": {"enum": ["full", "factorized"]}, "name_dim": {"type": "integer", "minimum": 1},
        "strict_groups": _BOOL,
    },
    "additionalProperties": False,
}

DECODER_SCHEMA = {
    "type": "object",
    "properties": {
        "d_model": {"type": "integer", "minimum": 2}, "layers": {"type": "integer", "minimum": 0},
        "heads": {"type": "integer", "minimum": 1}, "ff_mult": {"type": "integer", "minimum": 1},
        "dropout": {"type": "number", "minimum": 0, "maximum": 1}, "attention": {"enum": ["full", "factorized"]},
        "name_dim": {"type": "integer", "minimum": 1}, "noise_seed_policy": {"enum": ["per-call", "fixed"]},
    },
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "encoder": ENCODER_SCHEMA,
        "decoder": DECODER_SCHEMA,
        "name_provider": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["lexical", "table"]}, "dim": _INT, "seed": _INT, "path": {"type": "string"}},
        },
        "share_joints": _BOOL,
        "use_positions": _BOOL,
        "window_length": {"type": "integer", "minimum": 2},
        "dtype": {"enum": ["float32", "float64"]},
    },
    "additionalProperties": False,
}

TRAIN_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "batch_size": {"type": "integer", "minimum": 1},
        "window_length": {"type": "integer", "minimum": 2},
        "window_stride": {"type": "integer", "minimum": 1},
        "lr": {"type": "number", "exclusiveMinimum": 0},
        "betas": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        "weight_decay": {"type": "number", "minimum": 0},
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "steps": {"type": "integer", "minimum": 0},
        "seed": _INT,
        "ablations": {
            "type": "object",
            "properties": {
                "share_joints": _BOOL, "use_positions": _BOOL,
                "joint_mask_prob": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
            "additionalProperties": False,
        },
        "weights": {
            "type": "object",
            "properties": {"lambda_cyc": {"type": "number", "minimum": 0}, "lambda_root": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "p_other_skeleton": {"type": "number", "minimum": 0, "maximum": 1},
        "lr_schedule": {"enum": ["constant", "cosine"]},
        "warmup_steps": {"type": "integer", "minimum": 0},
        "stop_grad_cycle": _BOOL,
        "micro_batch": {"type": "integer", "minimum": 0},
        "checkpoint_every": {"type": "integer", "minimum": 0},
        "validate_every": {"type": "integer", "minimum": 0},
        "early_stop_l_rec": {"type": ["number", "null"]},
        "early_stop_window": {"type": "integer", "minimum": 1},
        "model": MODEL_SCHEMA,
    },
    "additionalProperties": False,
}

ABLATE_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "synth": SYNTH_CONFIG_SCHEMA,
        "train": TRAIN_CONFIG_SCHEMA,
        "seeds": {"type": "array", "items": _INT, "minItems": 1},
        "eval_seed": _INT,
    },
    "additionalProperties": False,
}


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def train_config_from_dict(data) -> TrainConfig:
    jsonschema.validate(data, TRAIN_CONFIG_SCHEMA)
    return TrainConfig.from_dict(data)


def synth_config_from_dict(data) -> SynthConfig:
    jsonschema.validate(data, SYNTH_CONFIG_SCHEMA)
    return SynthConfig.from_dict(data)


def load_train_config(path) -> TrainConfig:
    return train_config_from_dict(read_json(path))


def load_synth_config(path) -> SynthConfig:
    return synth_config_from_dict(read_json(path))


def load_ablate_config(path):
    """Returns ``(SynthConfig, TrainConfig, seeds, eval_seed)``."""
    data = read_json(path)
    jsonschema.validate(data, ABLATE_CONFIG_SCHEMA)
    return (
        SynthConfig.from_dict(data.get("synth", {})),
        TrainConfig.from_dict(data.get("train", {})),
        list(data.get("seeds", [0])),
        int(data.get("eval_seed", 0)),
    )
