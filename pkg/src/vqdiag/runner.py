"""High-level orchestration shared by the CLI and the acceptance suite:
corpus synthesis into the standard layout, staged training with checkpoint
and log management, and checkpoint evaluation.

Output layout under a run root:

    corpora/stage1/<domain>/{train,val}/   ranking-pair corpora
    corpora/stage2/{train,val}/            weak-label patch corpora
    corpora/stage3/{train,val}/            scored-video corpora
    checkpoints/stage{1,2,3}/final/        checkpoint directories
    checkpoints/stage{1,2,3}/epoch_NNN/    per-epoch checkpoints
    logs/metrics.jsonl                     append-only metric log
    reports/                               evaluation and inference output
"""

from __future__ import annotations

import os
from pathlib import Path

import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .corpus import (
    ArtifactCorpus,
    PairCorpus,
    VideoCorpus,
    write_artifact_corpus,
    write_pair_corpus,
    write_video_corpus,
)
from .errors import ArgumentError, ConfigurationError
from .frames import Domain
from .model import QualityModel
from .proxies import ExternalScoreTable
from .synthesis import (
    generate_artifact_patches,
    generate_mos_dataset,
    generate_patch_pairs,
    item_seed,
    make_sources,
)
from .training import MetricsLog, run_stage1, run_stage2, run_stage3

PROXY_SCORES_ENV = "VQDIAG_PROXY_SCORES"


def corpora_root(root: str | Path) -> Path:
    return Path(root) / "corpora"


def stage1_dir(root, domain: Domain, split: str) -> Path:
    return corpora_root(root) / "stage1" / Domain(domain).value / split


def stage2_dir(root, split: str) -> Path:
    return corpora_root(root) / "stage2" / split


def stage3_dir(root, split: str) -> Path:
    return corpora_root(root) / "stage3" / split


def checkpoint_dir(root, stage: int, name: str = "final") -> Path:
    return Path(root) / "checkpoints" / f"stage{stage}" / name


def metrics_path(root) -> Path:
    return Path(root) / "logs" / "metrics.jsonl"


def _external_scores() -> ExternalScoreTable | None:
    path = os.environ.get(PROXY_SCORES_ENV)
    return ExternalScoreTable.load(path) if path else None


def synthesize_corpora(cfg: RunConfig, root: str | Path) -> dict:
    """Generate every stage's corpora into the standard layout; returns the
    per-stage entry counts for the synthesis summary."""
    root = Path(root)
    synth = cfg.synth
    scores = _external_scores()
    summary: dict = {"stage1": {}, "stage2": {}, "stage3": {}}

    for domain_name in cfg.domains:
        domain = Domain(domain_name)
        hdr = synth.hdr_fraction_color if domain is Domain.COLOR else 0.0
        for split, n_sources, n_pairs, prefix in (
            ("train", synth.sources_per_domain, synth.pairs_per_domain, ""),
            ("val", synth.val_sources_per_domain, synth.val_pairs_per_domain, "val-"),
        ):
            sources = make_sources(
                n_sources,
                item_seed(cfg.seed, 1, f"bank-{domain.value}-{split}"),
                frames=synth.source_frames,
                height=synth.source_height,
                width=synth.source_width,
                hdr_fraction=hdr,
                tag=f"{domain.value}-{split}",
            )
            if synth.source_filter:
                sources = [s for s in sources if s.format_tag == synth.source_filter]
                if not sources:
                    raise ConfigurationError(
                        f"source_filter {synth.source_filter!r} removed every source"
                    )
            pairs = generate_patch_pairs(
                sources,
                domain,
                n_pairs,
                item_seed(cfg.seed, 2, f"pairs-{domain.value}-{split}"),
                patch_height=synth.patch_height,
                patch_width=synth.patch_width,
                clip_len=synth.clip_len,
                severity_weights=synth.severity_weights,
                external_scores=scores,
                id_prefix=prefix,
            )
            write_pair_corpus(
                stage1_dir(root, domain, split),
                pairs,
                meta={"seed": cfg.seed, "split": split, "source_filter": synth.source_filter},
            )
            summary["stage1"].setdefault(domain.value, {})[split] = len(pairs)

    for split, n_patches, prefix in (
        ("train", synth.artifact_patches, ""),
        ("val", synth.val_artifact_patches, "val-"),
    ):
        sources = make_sources(
            synth.sources_per_domain,
            item_seed(cfg.seed, 3, f"bank-artifacts-{split}"),
            frames=synth.source_frames,
            height=synth.source_height,
            width=synth.source_width,
            tag=f"art-{split}",
        )
        patches = generate_artifact_patches(
            sources,
            n_patches,
            item_seed(cfg.seed, 4, f"artifacts-{split}"),
            patch_height=synth.patch_height,
            patch_width=synth.patch_width,
            clip_len=synth.clip_len,
            pristine_fraction=synth.pristine_fraction,
            max_artifacts=synth.max_artifacts,
            severity_weights=synth.severity_weights,
            id_prefix=prefix,
        )
        write_artifact_corpus(stage2_dir(root, split), patches, meta={"seed": cfg.seed})
        pristine = sum(1 for p in patches if not p.specs)
        summary["stage2"][split] = {"patches": len(patches), "pristine": pristine}

    for split, n_videos, prefix in (
        ("train", synth.mos_videos, ""),
        ("val", synth.val_mos_videos, "val-"),
    ):
        sources = make_sources(
            synth.sources_per_domain,
            item_seed(cfg.seed, 5, f"bank-mos-{split}"),
            frames=synth.mos_frames,
            height=synth.source_height,
            width=synth.source_width,
            tag=f"mos-{split}",
        )
        videos = generate_mos_dataset(
            sources,
            n_videos,
            item_seed(cfg.seed, 6, f"mos-{split}"),
            frames=synth.mos_frames,
            height=synth.mos_height,
            width=synth.mos_width,
            severity_weights=synth.severity_weights,
            id_prefix=prefix,
        )
        write_video_corpus(stage3_dir(root, split), videos, meta={"seed": cfg.seed})
        summary["stage3"][split] = len(videos)

    return summary


def open_stage1_data(cfg: RunConfig, root) -> dict[Domain, dict[str, PairCorpus]]:
    data = {}
    for domain_name in cfg.domains:
        domain = Domain(domain_name)
        train_dir = stage1_dir(root, domain, "train")
        if not (train_dir / "manifest.json").exists():
            raise ConfigurationError(f"missing stage-1 corpus for {domain.value}: {train_dir}")
        entry = {"train": PairCorpus(train_dir)}
        val_dir = stage1_dir(root, domain, "val")
        entry["val"] = PairCorpus(val_dir) if (val_dir / "manifest.json").exists() else None
        data[domain] = entry
    return data


def open_stage2_data(root) -> dict[str, ArtifactCorpus]:
    data = {"train": ArtifactCorpus(stage2_dir(root, "train"))}
    val_dir = stage2_dir(root, "val")
    data["val"] = ArtifactCorpus(val_dir) if (val_dir / "manifest.json").exists() else None
    return data


def open_stage3_data(root) -> dict[str, VideoCorpus]:
    data = {"train": VideoCorpus(stage3_dir(root, "train"))}
    val_dir = stage3_dir(root, "val")
    data["val"] = VideoCorpus(val_dir) if (val_dir / "manifest.json").exists() else None
    return data


def _epoch_writer(root, stage: int):
    def write(model: QualityModel, record: dict):
        save_checkpoint(
            model,
            checkpoint_dir(root, stage, f"epoch_{record['epoch']:03d}"),
            meta={"stage": stage, "epoch": record["epoch"]},
        )

    return write


def train_stage(
    cfg: RunConfig,
    stage: int,
    root: str | Path,
    init: str | Path | None = None,
    keep_epoch_checkpoints: bool = True,
) -> Path:
    """Run one training stage against the corpora under ``root``.

    Stage 1 starts from a fresh model (or ``init``); later stages load the
    previous stage's final checkpoint and fail loudly when it is missing.
    Returns the final checkpoint path.
    """
    root = Path(root)
    if stage == 1:
        if init:
            model = load_checkpoint(init)[0]
        else:
            # fresh-model initialization draws from the run seed, so a rerun
            # reproduces the whole pipeline, not just the step sequence
            torch.manual_seed(item_seed(cfg.train.seed, 0, "model-init"))
            model = QualityModel(cfg.model)
    else:
        source = Path(init) if init else checkpoint_dir(root, stage - 1)
        if not (source / "index.json").exists():
            raise ArgumentError(
                f"stage {stage} needs the stage-{stage - 1} checkpoint at {source}; "
                "train the earlier stage first"
            )
        model, _ = load_checkpoint(source)

    log = MetricsLog(metrics_path(root))
    on_epoch = _epoch_writer(root, stage) if keep_epoch_checkpoints else None
    if stage == 1:
        run_stage1(open_stage1_data(cfg, root), cfg.train, model,
                   domains=tuple(Domain(d) for d in cfg.domains), log=log,
                   on_epoch_end=on_epoch)
    elif stage == 2:
        run_stage2(open_stage2_data(root), cfg.train, model, log=log, on_epoch_end=on_epoch)
    elif stage == 3:
        run_stage3(open_stage3_data(root), cfg.train, model, log=log,
                   require_stage2=cfg.train.train_diagnostics, on_epoch_end=on_epoch)
    else:
        raise ArgumentError(f"stage must be 1, 2, or 3, got {stage}")

    final = checkpoint_dir(root, stage)
    save_checkpoint(model, final, meta={"stage": stage, "variant": cfg.variant})
    return final


def run_full_training(cfg: RunConfig, root: str | Path,
                      keep_epoch_checkpoints: bool = False) -> Path:
    """Stages 1 through 3 back to back; skips stage 2 when diagnostics are
    disabled (the no-diagnostic ablation). Returns the last checkpoint path."""
    last = train_stage(cfg, 1, root, keep_epoch_checkpoints=keep_epoch_checkpoints)
    if cfg.train.train_diagnostics:
        last = train_stage(cfg, 2, root, keep_epoch_checkpoints=keep_epoch_checkpoints)
        last = train_stage(cfg, 3, root, keep_epoch_checkpoints=keep_epoch_checkpoints)
    else:
        last = train_stage(cfg, 3, root, init=checkpoint_dir(root, 1),
                           keep_epoch_checkpoints=keep_epoch_checkpoints)
    return last
