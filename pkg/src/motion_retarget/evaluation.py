"""Height-normalised position error over the synthetic splits, and the ablation matrix."""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MissingGroundTruth
from .model import RetargetModel
from .skeleton import compute_tpose, forward_kinematics, height_normalized_mse
from .synth import SPLIT_TAGS, Dataset, motion_id
from .training import Trainer, TrainConfig, retarget

REPORT_FORMAT = "motion_retarget.report/1"
ABLATIONS = {
    "full": {},
    "w/o share": {"share_joints": False},
    "w/o pos": {"use_positions": False},
    "w/ mask": {"joint_mask_prob": 0.2},
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["format", "config_hash", "checkpoint_id", "seed", "splits", "overall", "cases"],
    "properties": {
        "format": {"const": REPORT_FORMAT},
        "config_hash": {"type": "string"},
        "checkpoint_id": {"type": "string"},
        "seed": {"type": "integer"},
        "splits": {"type": "object", "additionalProperties": {"$ref": "#/$defs/summary"}},
        "overall": {"$ref": "#/$defs/summary"},
        "ablations": {"type": "object"},
        "cases": {"type": "array", "items": {
            "type": "object",
            "required": ["split", "structure", "source", "target", "ground_truth", "mse"],
        }},
    },
    "$defs": {"summary": {
        "type": "object",
        "required": ["intra", "cross", "all", "n_intra", "n_cross"],
        "properties": {
            "intra": {"type": ["number", "null"]}, "cross": {"type": ["number", "null"]},
            "all": {"type": ["number", "null"]},
            "n_intra": {"type": "integer"}, "n_cross": {"type": "integer"},
        },
    }},
}


@dataclass(frozen=True)
class EvalCase:
    split: str
    structure: str
    source: str
    target: str
    kind: str
    seed: int

    @property
    def source_motion(self):
        return motion_id(self.source, self.kind, self.seed)

    @property
    def ground_truth(self):
        return motion_id(self.target, self.kind, self.seed)


def _mean(values):
    return float(np.mean(values)) if values else None


def _summary(cases):
    intra = [c["mse"] for c in cases if c["structure"] == "intra"]
    cross = [c["mse"] for c in cases if c["structure"] == "cross"]
    return {"intra": _mean(intra), "cross": _mean(cross), "all": _mean(intra + cross),
            "n_intra": len(intra), "n_cross": len(cross)}


@dataclass
class EvalReport:
    config_hash: str
    checkpoint_id: str
    seed: int
    cases: list
    ablations: dict = field(default_factory=dict)

    @property
    def splits(self):
        tags = [t for t in SPLIT_TAGS if any(c["split"] == t for c in self.cases)]
        tags += sorted({c["split"] for c in self.cases} - set(tags))
        return {t: _summary([c for c in self.cases if c["split"] == t]) for t in tags}

    @property
    def overall(self):
        return _summary(self.cases)

    def to_dict(self):
        return {
            "format": REPORT_FORMAT,
            "config_hash": self.config_hash,
            "checkpoint_id": self.checkpoint_id,
            "seed": self.seed,
            "splits": self.splits,
            "overall": self.overall,
            "ablations": self.ablations,
            "cases": self.cases,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    def table(self):
        rows = [("split", "intra", "cross", "all")]
        for tag, s in list(self.splits.items()) + [("overall", self.overall)]:
            rows.append((tag, *(_fmt(s[k]) for k in ("intra", "cross", "all"))))
        return _render(rows)


def _fmt(x):
    return "-" if x is None else f"{x:.6f}"


def _render(rows):
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(str(v).ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def checkpoint_id(model: RetargetModel) -> str:
    """Digest of the parameters (order-stable), identical for a model and its saved file."""
    h = hashlib.sha256()
    for name, t in sorted(model.state_dict().items()):
        h.update(name.encode("utf-8"))
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()[:16]


def build_cases(dataset: Dataset, tags=SPLIT_TAGS):
    """Evaluation cases derived from manifest provenance.

    Intra-structural: base character to every base character of the same
    topology in the split (itself included). Cross-structural: base to its
    split variant and back.
    """
    chars = {c["id"]: c for c in dataset.manifest["characters"]}
    cases = []
    for tag in tags:
        split = dataset.manifest["splits"][tag]
        bases = [c for c in split["characters"] if chars[c]["topology"] == "base"]
        for kind, seed in split["motions"]:
            for src in bases:
                key = dataset.skeletons[src].topology_key()
                for tgt in bases:
                    if dataset.skeletons[tgt].topology_key() == key:
                        cases.append(EvalCase(tag, "intra", src, tgt, kind, seed))
                for var in dataset.variants_of(src):
                    cases.append(EvalCase(tag, "cross", src, var, kind, seed))
                    cases.append(EvalCase(tag, "cross", var, src, kind, seed))
    return cases


def case_error(model, dataset: Dataset, case: EvalCase, seed=0, ground_truth=None) -> float:
    gts = ground_truth if ground_truth is not None else dataset.motions
    if case.ground_truth not in gts:
        raise MissingGroundTruth(f"no ground truth {case.ground_truth!r} for case {case}")
    if case.source_motion not in dataset.motions:
        raise MissingGroundTruth(f"source motion {case.source_motion!r} is missing")
    src_sk, tgt_sk = dataset.skeletons[case.source], dataset.skeletons[case.target]
    pred = retarget(src_sk, dataset.motions[case.source_motion], tgt_sk, model, seed=seed)
    gt = gts[case.ground_truth]
    return height_normalized_mse(
        forward_kinematics(tgt_sk, pred), forward_kinematics(tgt_sk, gt), compute_tpose(tgt_sk).character_height
    )


def evaluate(model, dataset: Dataset, seed=0, tags=SPLIT_TAGS, ground_truth=None, cases=None) -> EvalReport:
    """Retarget every case and report height-normalised MSE per split and structure."""
    if isinstance(model, (str, os.PathLike)):
        model = RetargetModel.load(model)
    cases = build_cases(dataset, tags) if cases is None else cases
    rows = []
    for case in cases:
        mse = case_error(model, dataset, case, seed, ground_truth)
        rows.append({"split": case.split, "structure": case.structure, "source": case.source_motion,
                     "target": case.target, "ground_truth": case.ground_truth, "mse": mse})
    return EvalReport(model.config.hash(), checkpoint_id(model), int(seed), rows)


@dataclass
class AblationResult:
    name: str
    config: TrainConfig
    report: EvalReport
    steps: int


def run_ablation_matrix(base: TrainConfig, dataset: Dataset, seed: Optional[int] = None, out_dir=None,
                        eval_seed=0, tags=SPLIT_TAGS, ablations=None):
    """Train and evaluate every ablation with the same budget and seed."""
    from dataclasses import replace

    ablations = ABLATIONS if ablations is None else ablations
    base = base if seed is None else replace(base, seed=seed)
    # early stopping would give rows different budgets
    base = replace(base, early_stop_l_rec=None)
    pool = dataset.training_pool()
    results = {}
    for name, change in ablations.items():
        config = base.with_ablation(**change)
        run_dir = None if out_dir is None else os.path.join(out_dir, name.replace("/", "").replace(" ", "_"))
        trainer = Trainer(config, pool, out_dir=run_dir)
        trainer.run()
        report = evaluate(trainer.model, dataset, eval_seed, tags)
        results[name] = AblationResult(name, config, report, trainer.step)
    steps = {r.steps for r in results.values()}
    if len(steps) != 1:
        raise AssertionError(f"ablation rows trained for different step counts: {sorted(steps)}")
    return results


def ablation_table(results: dict) -> str:
    rows = [("config", "intra", "cross", "all", "steps")]
    for name, r in results.items():
        o = r.report.overall
        rows.append((name, _fmt(o["intra"]), _fmt(o["cross"]), _fmt(o["all"]), str(r.steps)))
    return _render(rows)


def ablation_summary(results: dict) -> dict:
    return {name: {**r.report.overall, "steps": r.steps, "config_hash": r.report.config_hash}
            for name, r in results.items()}


def is_finite_report(report: EvalReport) -> bool:
    return all(math.isfinite(c["mse"]) for c in report.cases)
