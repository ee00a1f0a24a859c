"""Command-line interface.

Exit codes: 0 success, 1 usage or other input error, 2 parse error (BVH,
JSON, schema), 3 configuration mismatch, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace

import jsonschema

from . import errors
from .bvh import BvhDocument, parse_bvh, write_bvh
from .config import load_ablate_config, load_synth_config, load_train_config
from .evaluation import ablation_summary, ablation_table, evaluate, run_ablation_matrix
from .model import RetargetModel
from .skeleton import compute_tpose
from .synth import build_dataset, load_dataset, write_dataset
from .training import Trainer, retarget

EXIT_USAGE, EXIT_PARSE, EXIT_CONFIG, EXIT_NUMERIC = 1, 2, 3, 4

_EXIT_CODES = (
    ((errors.BvhError, json.JSONDecodeError, jsonschema.ValidationError, errors.InvalidSkeleton,
      errors.InvalidMotion), EXIT_PARSE),
    ((errors.ConfigMismatch, errors.SkeletonMismatch, errors.WindowTooShort), EXIT_CONFIG),
    ((errors.NonFiniteLoss, errors.NonFiniteGradient, errors.DegenerateRotation, errors.NotARotation),
     EXIT_NUMERIC),
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def exit_code(exc: BaseException) -> int:
    for types, code in _EXIT_CODES:
        if isinstance(exc, types):
            return code
    return EXIT_USAGE


def cmd_parse(args):
    doc = parse_bvh(args.file)
    sk, m = doc.skeleton, doc.motion
    print(f"joints: {sk.n_joints}")
    print(f"frames: {m.frame_count}")
    print(f"fps: {m.fps:g}")
    print(f"channels: {doc.channel_count}")
    tpose = compute_tpose(sk)
    print(f"character_height: {tpose.character_height:.6f}")
    print(f"root_height: {tpose.root_height:.6f}")
    if not args.summary:
        for i, j in enumerate(sk.joints):
            parent = "-" if j.parent is None else sk.joints[j.parent].name
            print(f"  {i:3d} {j.name} parent={parent} channels={' '.join(doc.channel_layout[i]) or '-'}")
    return 0


def cmd_synth(args):
    config = load_synth_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    dataset = build_dataset(config)
    write_dataset(dataset, args.out)
    m = dataset.manifest
    print(f"wrote {len(m['characters'])} characters and {len(m['motions'])} motions to {args.out}")
    return 0


def cmd_train(args):
    config = load_train_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.steps is not None:
        config = replace(config, steps=args.steps)
    dataset = load_dataset(args.data)
    validation = None
    if config.validate_every:
        split = dataset.manifest["splits"]["sc+sm"]
        validation = [(dataset.skeletons[c], dataset.motion(c, k, s)) for c in split["characters"]
                      for k, s in split["motions"]]
    trainer = Trainer(config, dataset.training_pool(), validation=validation, out_dir=args.out)

    def progress(report):
        if args.log_every and report.step % args.log_every == 0:
            print(f"step {report.step}: l_total={report.l_total:.6f} l_rec={report.l_rec:.6f} "
                  f"l_cyc={report.l_cyc:.6f} l_root={report.l_root:.6f}", flush=True)

    trainer.run(callback=progress)
    print(f"trained {trainer.step} steps; checkpoints and loss.csv in {args.out}")
    return 0


def cmd_retarget(args):
    src = parse_bvh(args.src)
    tgt = parse_bvh(args.target_skeleton)
    model = RetargetModel.load(args.ckpt)
    motion = retarget(src.skeleton, src.motion, tgt.skeleton, model, seed=args.seed)
    root_channels = tgt.channel_layout[0]
    if all(any(c == f"{a}position" for c in root_channels) for a in "XYZ"):
        doc = BvhDocument(tgt.skeleton, motion, tgt.channel_layout, tgt.euler_order)
    else:
        doc = BvhDocument.from_motion(tgt.skeleton, motion)
    write_bvh(doc, args.out)
    print(f"wrote {motion.frame_count} frames for {tgt.skeleton.n_joints} joints to {args.out}")
    return 0


def cmd_eval(args):
    dataset = load_dataset(args.data)
    report = evaluate(RetargetModel.load(args.ckpt), dataset, seed=args.seed)
    report.write(args.report)
    print(report.table())
    return 0


def cmd_ablate(args):
    synth_config, train_config, seeds, eval_seed = load_ablate_config(args.config)
    if args.seed is not None:
        seeds = [args.seed]
    dataset = build_dataset(synth_config)
    os.makedirs(args.out, exist_ok=True)
    write_dataset(dataset, os.path.join(args.out, "data"))
    summary = {}
    for seed in seeds:
        results = run_ablation_matrix(train_config, dataset, seed=seed, out_dir=os.path.join(args.out, f"seed{seed}"),
                                      eval_seed=eval_seed)
        print(f"seed {seed}")
        print(ablation_table(results))
        summary[str(seed)] = ablation_summary(results)
        for name, r in results.items():
            r.report.ablations = {"name": name, **asdict(r.config.ablations)}
            r.report.write(os.path.join(args.out, f"seed{seed}", f"{name.replace('/', '').replace(' ', '_')}.json"))
    with open(os.path.join(args.out, "ablation.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def build_parser():
    p = _Parser(prog="motion-retarget", description="Skeleton-agnostic motion retargeting.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("parse", help="summarise a BVH file")
    s.add_argument("file")
    s.add_argument("--summary", action="store_true", help="counts only, no joint listing")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("synth", help="generate a synthetic dataset and manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train on a synthetic dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="checkpoint directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--log-every", type=int, default=0)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("retarget", help="retarget a BVH motion onto another skeleton")
    s.add_argument("--src", required=True)
    s.add_argument("--target-skeleton", required=True)
    s.add_argument("--ckpt", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_retarget)

    s = sub.add_parser("eval", help="evaluate a checkpoint on every split")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("ablate", help="train and evaluate the ablation matrix")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (errors.RetargetError, json.JSONDecodeError, jsonschema.ValidationError, OSError, ValueError,
            KeyError) as exc:
        message = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
