"""Command-line surface: synth, train, infer, eval, ablate, summarize.

Every command validates its config before doing any work and exits nonzero
with a diagnostic on failure. All outputs land under --out.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .ablation import VARIANTS, derive_variant, render_ablation_table, run_ablation
from .checkpoint import checkpoint_hash, load_checkpoint
from .config import RunConfig, load_run_config
from .corpus import ArtifactCorpus, VideoCorpus, open_corpus
from .errors import VqdiagError
from .evaluate import (
    EvalReport,
    evaluate_artifacts,
    evaluate_quality,
    render_artifact_table,
    render_quality_table,
)
from .frames import load_png_dir, load_raw
from .model import summarize_model, QualityModel
from .pipeline import score_video, threshold_diagnostics
from .runner import synthesize_corpora, train_stage


def _load_config(path: str | None) -> RunConfig:
    return load_run_config(path) if path else RunConfig()


def _apply_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    if seed is not None:
        cfg.seed = seed
        cfg.train.seed = seed
    return cfg


def _load_video_input(path: str):
    p = Path(path)
    if p.is_dir():
        return load_png_dir(p)
    return load_raw(p)


def cmd_synth(args) -> int:
    cfg = _apply_seed(_load_config(args.config), args.seed)
    summary = synthesize_corpora(cfg, args.out)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def cmd_train(args) -> int:
    cfg = _apply_seed(_load_config(args.config), args.seed)
    if args.variant:
        cfg = derive_variant(cfg, args.variant)
    final = train_stage(cfg, args.stage, args.out, init=args.init)
    print(f"stage {args.stage} checkpoint: {final}")
    return 0


def cmd_infer(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    if model.cfg.mode == "NR" and args.ref:
        raise VqdiagError("checkpoint is a no-reference model but --ref was given")
    if model.cfg.mode == "FR" and not args.ref:
        raise VqdiagError("checkpoint is a full-reference model; --ref is required")
    dist = _load_video_input(args.dist)
    ref = _load_video_input(args.ref) if args.ref else None
    report = score_video(model, dist, ref, model_id=checkpoint_hash(args.checkpoint))
    out = Path(args.out or "report.json")
    report.save(out)
    flags = threshold_diagnostics(report, args.threshold)
    flagged = sorted(name for name, hit in flags.items() if hit)
    print(f"q_video: {report.q_video:.4f}")
    print(f"artifacts >= {args.threshold}: {', '.join(flagged) if flagged else '(none)'}")
    print(f"report: {out}")
    return 0


def cmd_eval(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    corpus = open_corpus(args.corpus)
    report = EvalReport(meta={"checkpoint": str(args.checkpoint), "corpus": str(args.corpus)})
    if isinstance(corpus, VideoCorpus):
        report.quality = evaluate_quality(model, corpus, split_name=args.split)
        print(render_quality_table(report.quality))
    elif isinstance(corpus, ArtifactCorpus):
        report.artifacts = evaluate_artifacts(model, corpus, threshold=args.threshold)
        print(render_artifact_table(report.artifacts))
    else:
        raise VqdiagError("eval expects a scored-video or artifact-patch corpus")
    out = Path(args.out) / "eval_report.json" if args.out else Path("eval_report.json")
    report.save(out)
    print(f"report: {out}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _apply_seed(_load_config(args.config), args.seed)
    variants = tuple(args.variants.split(","))
    seeds = tuple(int(s) for s in args.seeds.split(","))
    results = run_ablation(cfg, variants, seeds, args.out)
    print(render_ablation_table(results))
    out = Path(args.out) / "ablation.json"
    out.write_text(json.dumps(results, sort_keys=True, indent=2) + "\n")
    print(f"table: {out}")
    return 0


def cmd_summarize(args) -> int:
    if args.checkpoint:
        model, _ = load_checkpoint(args.checkpoint)
    else:
        cfg = _load_config(args.config)
        model = QualityModel(cfg.model)
    print(json.dumps(summarize_model(model), sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqdiag",
        description="diagnostic video quality model: data lab, staged training, "
        "inference, evaluation, ablations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the three stage corpora")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--out", required=True, help="run root directory")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="run one training stage")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--stage", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--out", required=True, help="run root directory (holds corpora/)")
    p.add_argument("--init", help="checkpoint directory overriding the stage prerequisite")
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", choices=VARIANTS)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("infer", help="score one video and emit its report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dist", required=True, help="raw clip stem or PNG directory")
    p.add_argument("--ref", help="reference (full-reference checkpoints only)")
    p.add_argument("--out", help="report JSON path (default report.json)")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="directory for eval_report.json")
    p.add_argument("--split", default="all", help="name for the quality table row")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="train and compare ablation variants")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--variants", default="full,V1_single_expert")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--seed", type=int, help="corpus seed override")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("summarize", help="parameter and MAC summary")
    p.add_argument("--checkpoint")
    p.add_argument("--config")
    p.set_defaults(fn=cmd_summarize)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except VqdiagError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
