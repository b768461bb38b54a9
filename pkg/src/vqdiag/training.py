"""Three-stage training: proxy-guided ranking pre-training of the experts,
weakly-supervised diagnostic-head training on a frozen backbone, and joint
fine-tuning on scored videos with the experts and extractor kept frozen.

Stage freeze sets are enforced twice: parameters outside the stage's
trainable set never enter the optimizer, and group hashes are compared
before/after the stage, raising on any drift.

All acceptance-grade runs use single-threaded numerics (``threads=1``) so
reruns with the same seed reproduce metric logs byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import group_hashes
from .corpus import ArtifactCorpus, PairCorpus, VideoCorpus
from .distortions import ARTIFACT_KINDS
from .errors import ArgumentError, ConfigurationError, ContractViolationError
from .frames import Domain, FrameSequence
from .losses import artifact_loss, global_loss, rank_loss, total_loss
from .metrics import f1_accuracy_auc, srocc
from .model import (
    GROUP_AGGREGATOR,
    GROUP_EXTRACTOR,
    GROUP_HEAD_A,
    GROUP_HEAD_Q,
    QualityModel,
    assemble_input,
    clips_to_tensor,
)
from .synthesis import item_seed

EVAL_BATCH = 16


@dataclass
class TrainConfig:
    lambda_g: float = 1.0
    lambda_a: float = 0.5
    learning_rate: float = 1e-4
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 20
    epochs: int = 5
    batch_size: int = 4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    seed: int = 0
    bce_epsilon: float = 1e-7
    # "decay 0.1 every 20 epochs" read as stepwise lr decay; the literal
    # optimizer weight-decay reading stays available as a switch.
    decay_interpretation: str = "step_lr"  # or "adam_weight_decay"
    interleave: str = "round_robin"  # or "proportional"
    train_diagnostics: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.lambda_g < 0 or self.lambda_a < 0:
            raise ConfigurationError("loss weights must be nonnegative")
        if not (0.0 < self.bce_epsilon < 1e-3):
            raise ConfigurationError("bce_epsilon must lie in (0, 1e-3)")
        if self.decay_interpretation not in ("step_lr", "adam_weight_decay"):
            raise ConfigurationError(
                f"unknown decay interpretation {self.decay_interpretation!r}"
            )
        if self.interleave not in ("round_robin", "proportional"):
            raise ConfigurationError(f"unknown interleave mode {self.interleave!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")


@dataclass(frozen=True)
class StagePlan:
    stage: str
    trainable: tuple[str, ...]
    frozen: tuple[str, ...]


def stage_plan(stage: int, model: QualityModel, train_diagnostics: bool = True) -> StagePlan:
    groups = set(model.group_names())
    experts = tuple(g for g in groups if g.startswith("expert_"))
    if stage == 1:
        trainable = {GROUP_EXTRACTOR, *experts, GROUP_AGGREGATOR, GROUP_HEAD_Q}
    elif stage == 2:
        trainable = {GROUP_HEAD_A}
    elif stage == 3:
        trainable = {GROUP_AGGREGATOR, GROUP_HEAD_Q, GROUP_HEAD_A}
        if not train_diagnostics:
            trainable.discard(GROUP_HEAD_A)
    else:
        raise ArgumentError(f"stage must be 1, 2, or 3, got {stage}")
    frozen = groups - trainable
    return StagePlan(f"stage{stage}", tuple(sorted(trainable)), tuple(sorted(frozen)))


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Stepwise decay: base rate times decay_factor every decay interval."""
    if epoch < 0:
        raise ArgumentError("epoch must be >= 0")
    if cfg.decay_interpretation == "adam_weight_decay":
        return cfg.learning_rate
    return cfg.learning_rate * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every)


class MetricsLog:
    """Append-only JSON-lines metric log; records carry no timestamps so
    deterministic reruns write identical bytes."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.records: list[dict] = []
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, record: dict):
        self.records.append(record)
        if self.path:
            with self.path.open("a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def _rng(cfg: TrainConfig, tag: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(item_seed(cfg.seed, 0, tag)))


def _setup(model: QualityModel, cfg: TrainConfig, stage: int) -> StagePlan:
    torch.set_num_threads(max(1, cfg.threads))
    torch.manual_seed(item_seed(cfg.seed, stage, "torch"))
    plan = stage_plan(stage, model, cfg.train_diagnostics)
    model.apply_freeze_plan(set(plan.trainable), set(plan.frozen))
    for group in plan.frozen:
        if not model.frozen.get(group, False):
            raise ContractViolationError(f"group {group} must be frozen for {plan.stage}")
    return plan


def _optimizer(model: QualityModel, cfg: TrainConfig) -> torch.optim.Optimizer:
    params = model.trainable_parameters()
    if cfg.decay_interpretation == "adam_weight_decay":
        return torch.optim.AdamW(
            params,
            lr=cfg.learning_rate,
            betas=(cfg.adam_beta1, cfg.adam_beta2),
            weight_decay=cfg.lr_decay_factor,
        )
    return torch.optim.Adam(
        params, lr=cfg.learning_rate, betas=(cfg.adam_beta1, cfg.adam_beta2)
    )


def _set_lr(optimizer: torch.optim.Optimizer, lr: float):
    for group in optimizer.param_groups:
        group["lr"] = lr


def _check_frozen(model: QualityModel, before: dict[str, str], plan: StagePlan):
    after = group_hashes(model)
    drifted = [g for g in plan.frozen if before[g] != after[g]]
    if drifted:
        raise ContractViolationError(f"{plan.stage} mutated frozen groups: {drifted}")


def _require_history(model: QualityModel, needed: str, stage: str):
    if needed not in model.stage_history:
        raise ContractViolationError(
            f"{stage} requires a model that completed {needed}; "
            f"history is {model.stage_history or ['<fresh>']}"
        )


# ---------------------------------------------------------------------------
# Batch assembly


def _pair_batch(corpus: PairCorpus, indices, mode: str):
    clips_a, clips_b, labels = [], [], []
    for i in indices:
        a, b, ref, label = corpus.load_pair(int(i))
        ref_in = ref if mode == "FR" else None
        clips_a.append(assemble_input(a, ref_in, mode))
        clips_b.append(assemble_input(b, ref_in, mode))
        labels.append(label)
    x = clips_to_tensor(clips_a + clips_b)
    return x, torch.tensor(labels, dtype=torch.float32)


def _window(rng, seq: FrameSequence, clip_len: int) -> tuple[FrameSequence, int]:
    if seq.t < clip_len:
        raise ArgumentError(f"video of {seq.t} frames shorter than clip_len {clip_len}")
    t0 = int(rng.integers(0, seq.t - clip_len + 1))
    return seq.with_frames(seq.frames[t0 : t0 + clip_len].copy()), t0


def _slice(seq: FrameSequence, t0: int, clip_len: int) -> FrameSequence:
    return seq.with_frames(seq.frames[t0 : t0 + clip_len].copy())


# ---------------------------------------------------------------------------
# Stage 1: proxy-guided ranking pre-training


def pair_ranking_accuracy(
    model: QualityModel, corpus: PairCorpus, batch_size: int = EVAL_BATCH
) -> float:
    """Fraction of held-out pairs whose predicted order matches the proxy."""
    model.eval()
    n = len(corpus)
    correct = 0
    with torch.no_grad():
        for start in range(0, n, batch_size):
            idx = range(start, min(start + batch_size, n))
            x, labels = _pair_batch(corpus, idx, model.cfg.mode)
            q, _ = model(x, corpus.domain)
            k = len(labels)
            predicted = (q[:k] > q[k:]).to(torch.float32)
            correct += int((predicted == labels).sum().item())
    return correct / n


def run_stage1(
    data: dict[Domain, dict[str, PairCorpus]],
    cfg: TrainConfig,
    model: QualityModel,
    domains: tuple[Domain, ...] | None = None,
    log: MetricsLog | None = None,
    on_epoch_end=None,
) -> list[dict]:
    """Interleave domain batches, route each to its expert, optimize the
    ranking loss; reports held-out per-domain pairwise accuracy per epoch."""
    log = log or MetricsLog()
    domains = tuple(Domain(d) for d in (domains or sorted(data, key=lambda d: d.value)))
    for d in domains:
        if d not in data or "train" not in data[d]:
            raise ConfigurationError(f"no stage-1 training corpus for domain {d.value}")
    plan = _setup(model, cfg, 1)
    before = group_hashes(model)
    optimizer = _optimizer(model, cfg)

    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg)
        _set_lr(optimizer, lr)
        order_rng = _rng(cfg, f"stage1-epoch{epoch}")
        chunks: dict[Domain, list[np.ndarray]] = {}
        for d in domains:
            n = len(data[d]["train"])
            perm = order_rng.permutation(n)
            chunks[d] = [
                perm[s : s + cfg.batch_size] for s in range(0, n, cfg.batch_size)
            ]
        if cfg.interleave == "round_robin":
            # Equal weight per domain regardless of corpus size: shorter
            # domains cycle their batches until the longest is exhausted.
            rounds = max(len(c) for c in chunks.values())
            schedule = [
                (d, chunks[d][r % len(chunks[d])]) for r in range(rounds) for d in domains
            ]
        else:
            schedule = [(d, c) for d in domains for c in chunks[d]]
            order_rng.shuffle(schedule)

        model.train()
        losses = []
        for domain, idx in schedule:
            x, labels = _pair_batch(data[domain]["train"], idx, model.cfg.mode)
            q, _ = model(x, domain)
            k = len(labels)
            loss = rank_loss(q[:k], q[k:], labels, cfg.bce_epsilon)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.item()))

        record = {
            "stage": 1,
            "epoch": epoch,
            "lr": lr,
            "loss": float(np.mean(losses)),
            "rank_accuracy": {
                d.value: pair_ranking_accuracy(model, data[d]["val"])
                for d in domains
                if data[d].get("val") is not None
            },
        }
        log.append(record)
        if on_epoch_end:
            on_epoch_end(model, record)

    _check_frozen(model, before, plan)
    model.stage_history.append("stage1")
    return log.records


# ---------------------------------------------------------------------------
# Stage 2: weakly-supervised diagnostic head on a frozen backbone


def _fused_representation(
    model: QualityModel, corpus: ArtifactCorpus, batch_size: int = EVAL_BATCH
) -> tuple[torch.Tensor, torch.Tensor]:
    """z for every patch under the frozen backbone (no dropout lives there,
    so caching is exact), plus the weak label matrix."""
    model.eval()
    zs, labels = [], []
    with torch.no_grad():
        for start in range(0, len(corpus), batch_size):
            clips, labs = [], []
            for i in range(start, min(start + batch_size, len(corpus))):
                patch, ref, lab = corpus.load_patch(i)
                ref_in = ref if model.cfg.mode == "FR" else None
                clips.append(assemble_input(patch, ref_in, model.cfg.mode))
                labs.append(lab)
            x = clips_to_tensor(clips)
            z = model.fuse(model.expert_features(model.embed(x), None))
            zs.append(z)
            labels.append(torch.tensor(np.stack(labs), dtype=torch.float32))
    return torch.cat(zs), torch.cat(labels)


def artifact_f1_table(predictions: np.ndarray, labels: np.ndarray, threshold=0.5) -> dict:
    """Per-artifact F1 keyed by kind name (single-class columns give 0/1-free
    F1 from the confusion counts as usual)."""
    out = {}
    for j, kind in enumerate(ARTIFACT_KINDS):
        f1, _, _ = f1_accuracy_auc(predictions[:, j], labels[:, j], threshold)
        out[kind.value] = f1
    return out


def run_stage2(
    data: dict[str, ArtifactCorpus],
    cfg: TrainConfig,
    model: QualityModel,
    log: MetricsLog | None = None,
    on_epoch_end=None,
) -> list[dict]:
    """Train the diagnostic head only; every other group stays bit-identical."""
    log = log or MetricsLog()
    _require_history(model, "stage1", "stage 2")
    if "train" not in data:
        raise ConfigurationError("stage 2 needs a 'train' artifact corpus")
    plan = _setup(model, cfg, 2)
    before = group_hashes(model)
    optimizer = _optimizer(model, cfg)

    z_train, y_train = _fused_representation(model, data["train"])
    z_val = y_val = None
    if data.get("val") is not None:
        z_val, y_val = _fused_representation(model, data["val"])

    n = z_train.shape[0]
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg)
        _set_lr(optimizer, lr)
        order = _rng(cfg, f"stage2-epoch{epoch}").permutation(n)
        model.head_a.train()
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            pred = torch.sigmoid(model.head_a(z_train[idx]))
            loss = artifact_loss(pred, y_train[idx], cfg.bce_epsilon)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.item()))

        record = {"stage": 2, "epoch": epoch, "lr": lr, "loss": float(np.mean(losses))}
        if z_val is not None:
            model.head_a.eval()
            with torch.no_grad():
                preds = torch.sigmoid(model.head_a(z_val)).numpy()
            record["val_f1"] = artifact_f1_table(preds, y_val.numpy())
        log.append(record)
        if on_epoch_end:
            on_epoch_end(model, record)

    _check_frozen(model, before, plan)
    model.stage_history.append("stage2")
    return log.records


# ---------------------------------------------------------------------------
# Stage 3: joint fine-tuning on scored videos


def _video_clip_scores(model: QualityModel, corpus: VideoCorpus, clip_len: int) -> np.ndarray:
    """Mean per-clip quality score of every video, eval mode."""
    from .pipeline import segment_clips  # local import: pipeline depends on model

    model.eval()
    scores = []
    with torch.no_grad():
        for i in range(len(corpus)):
            dist, ref, _, _ = corpus.load_video(i)
            clips_d = segment_clips(dist, clip_len)
            clips_r = segment_clips(ref, clip_len) if model.cfg.mode == "FR" else [None] * len(clips_d)
            x = clips_to_tensor(
                [assemble_input(d, r, model.cfg.mode) for d, r in zip(clips_d, clips_r)]
            )
            q, _ = model(x, None)
            scores.append(float(q.to(torch.float64).mean().item()))
    return np.asarray(scores)


def heldout_srocc(model: QualityModel, corpus: VideoCorpus, clip_len: int) -> float:
    predicted = _video_clip_scores(model, corpus, clip_len)
    mos = np.asarray([corpus.entries[i]["mos"]["score"] for i in range(len(corpus))])
    return srocc(predicted, mos)


def run_stage3(
    data: dict[str, VideoCorpus],
    cfg: TrainConfig,
    model: QualityModel,
    log: MetricsLog | None = None,
    require_stage2: bool = True,
    on_epoch_end=None,
) -> list[dict]:
    """Joint fine-tuning: each step draws one scored video pair, optimizes the
    weighted sum of the score-difference loss and the artifact loss on the
    same clips' weak labels. Experts and extractor stay bit-identical."""
    log = log or MetricsLog()
    _require_history(model, "stage1", "stage 3")
    if require_stage2 and cfg.train_diagnostics:
        _require_history(model, "stage2", "stage 3")
    if "train" not in data:
        raise ConfigurationError("stage 3 needs a 'train' video corpus")
    plan = _setup(model, cfg, 3)
    before = group_hashes(model)
    optimizer = _optimizer(model, cfg)
    clip_len = model.cfg.clip_len

    train = data["train"]
    n = len(train)
    if n < 2:
        raise ConfigurationError("stage 3 needs at least two scored videos")
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg)
        _set_lr(optimizer, lr)
        rng = _rng(cfg, f"stage3-epoch{epoch}")
        order = rng.permutation(n)
        model.train()
        losses = []
        for k in range(0, n - 1, 2):
            i, j = int(order[k]), int(order[k + 1])
            dist_x, ref_x, mos_x, lab_x = train.load_video(i)
            dist_y, ref_y, mos_y, lab_y = train.load_video(j)
            clip_x, tx = _window(rng, dist_x, clip_len)
            clip_y, ty = _window(rng, dist_y, clip_len)
            fr = model.cfg.mode == "FR"
            x = clips_to_tensor(
                [
                    assemble_input(
                        clip_x, _slice(ref_x, tx, clip_len) if fr else None, model.cfg.mode
                    ),
                    assemble_input(
                        clip_y, _slice(ref_y, ty, clip_len) if fr else None, model.cfg.mode
                    ),
                ]
            )
            q, a = model(x, None)
            l_g = global_loss(q[0], q[1], mos_x, mos_y)
            if cfg.lambda_a > 0 and cfg.train_diagnostics:
                target = torch.tensor(np.stack([lab_x, lab_y]), dtype=torch.float32)
                l_a = artifact_loss(a, target, cfg.bce_epsilon)
            else:
                l_a = torch.zeros((), dtype=q.dtype)
            loss = total_loss(l_g, l_a, cfg.lambda_g, cfg.lambda_a)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.item()))

        record = {"stage": 3, "epoch": epoch, "lr": lr, "loss": float(np.mean(losses))}
        if data.get("val") is not None:
            record["val_srocc"] = heldout_srocc(model, data["val"], clip_len)
        log.append(record)
        if on_epoch_end:
            on_epoch_end(model, record)

    _check_frozen(model, before, plan)
    model.stage_history.append("stage3")
    return log.records
