"""Ablation variants: documented, deterministic config transformations plus
a runner that trains each variant on identical corpora and tabulates
held-out per-domain rank correlation across seeds."""

from __future__ import annotations

import json
import copy
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .config import ALL_DOMAINS, RunConfig
from .errors import ConfigurationError
from .frames import Domain
from .runner import open_stage3_data, run_full_training, synthesize_corpora, corpora_root
from .training import heldout_srocc

VARIANTS = (
    "full",
    "V1_single_expert",
    "V2_cnn_aggregator",
    "V3_no_udh",
    "V4_spatial_hd_only",
    "V5_full_spatial_only",
    "V6_spatial_color",
    "V7_all_domains",
    "NR_V1",
    "NR_V2",
    "NR_V3",
)


def derive_variant(base: RunConfig, tag: str) -> RunConfig:
    """Apply one variant's documented delta to a base config.

    * V1 / NR_V1: one shared adapter sized to triple bottleneck width, so
      total parameters stay within a few percent of the full model.
    * V2 / NR_V2: plain temporal-convolution aggregator.
    * V3 / NR_V3: no diagnostic training (artifact weight zero, head left at
      initialization, stage 2 skipped).
    * V4-V6: training corpora cut down by domain (V4 additionally keeps only
      the hd-tagged sources); experts without data are removed.
    * V7: alias of the full three-domain configuration.
    * NR_*: same deltas on the no-reference model.
    """
    if tag not in VARIANTS:
        raise ConfigurationError(f"unknown ablation variant {tag!r}; know {VARIANTS}")
    cfg = copy.deepcopy(base)
    cfg.variant = tag
    nr = tag.startswith("NR_")
    if nr:
        cfg.model = replace(cfg.model, mode="NR")
    core = tag.split("_", 1)[1] if nr else tag

    if core in ("full", "V7_all_domains"):
        return cfg
    if core in ("V1", "V1_single_expert"):
        bottleneck = 3 * (cfg.model.adapter_bottleneck or cfg.model.embed_dim // 4)
        cfg.model = replace(
            cfg.model, num_experts=1, expert_domains=(), adapter_bottleneck=bottleneck
        )
        return cfg
    if core in ("V2", "V2_cnn_aggregator"):
        cfg.model = replace(cfg.model, aggregator="temporal_conv")
        return cfg
    if core in ("V3", "V3_no_udh"):
        cfg.train = replace(cfg.train, lambda_a=0.0, train_diagnostics=False)
        return cfg
    if core == "V4_spatial_hd_only":
        cfg.domains = (Domain.SPATIAL.value,)
        cfg.model = replace(cfg.model, num_experts=1, expert_domains=("spatial",))
        cfg.synth.source_filter = "hd"
        return cfg
    if core == "V5_full_spatial_only":
        cfg.domains = (Domain.SPATIAL.value,)
        cfg.model = replace(cfg.model, num_experts=1, expert_domains=("spatial",))
        return cfg
    if core == "V6_spatial_color":
        cfg.domains = (Domain.SPATIAL.value, Domain.COLOR.value)
        cfg.model = replace(cfg.model, num_experts=2, expert_domains=("spatial", "color"))
        return cfg
    raise ConfigurationError(f"unhandled variant {tag!r}")


def per_domain_srocc(model, root) -> dict[str, float]:
    """Held-out SROCC against the synthetic scores, split by the domain of
    each video's injected artifact."""
    corpus = open_stage3_data(root)["val"]
    from .training import _video_clip_scores
    from .metrics import srocc as _srocc

    predicted = _video_clip_scores(model, corpus, model.cfg.clip_len)
    mos = np.asarray([e["mos"]["score"] for e in corpus.entries])
    domains = np.asarray([e["domain"] for e in corpus.entries])
    out = {}
    for d in ALL_DOMAINS:
        mask = domains == d
        if mask.sum() >= 2:
            out[d] = _srocc(predicted[mask], mos[mask])
    return out


def run_ablation(
    base: RunConfig,
    variants: tuple[str, ...],
    seeds: tuple[int, ...],
    root: str | Path,
) -> dict:
    """Train each variant with each training seed on shared corpora.

    Corpora are synthesized once per distinct corpus recipe (a variant that
    narrows domains or filters sources gets its own corpus tree); training
    seeds vary only model initialization and batch order. Returns the result
    table with per-seed, per-domain held-out SROCC plus mean and std.
    """
    root = Path(root)
    results: dict = {"variants": {}, "seeds": list(seeds)}
    corpus_cache: dict[str, Path] = {}

    for tag in variants:
        cfg = derive_variant(base, tag)
        recipe = json.dumps(
            {"domains": cfg.domains, "filter": cfg.synth.source_filter, "seed": cfg.seed},
            sort_keys=True,
        )
        if recipe not in corpus_cache:
            corpus_root = root / f"corpora_{len(corpus_cache)}"
            synthesize_corpora(cfg, corpus_root)
            corpus_cache[recipe] = corpus_root
        corpus_root = corpus_cache[recipe]

        per_seed = []
        for seed in seeds:
            run_cfg = copy.deepcopy(cfg)
            run_cfg.train = replace(run_cfg.train, seed=seed)
            run_root = root / f"{tag}_seed{seed}"
            _link_corpora(corpus_root, run_root)
            final = run_full_training(run_cfg, run_root)
            model, _ = load_checkpoint(final)
            per_seed.append(per_domain_srocc(model, run_root))
        means = [float(np.mean(list(row.values()))) for row in per_seed]
        results["variants"][tag] = {
            "per_seed": per_seed,
            "mean_srocc": float(np.mean(means)),
            "std_srocc": float(np.std(means)),
        }
    return results


def _link_corpora(corpus_root: Path, run_root: Path):
    """Expose a shared corpus tree inside a run directory via symlink."""
    run_root.mkdir(parents=True, exist_ok=True)
    link = corpora_root(run_root)
    if link.exists() or link.is_symlink():
        return
    link.parent.mkdir(parents=True, exist_ok=True)
    link.symlink_to(corpora_root(corpus_root).resolve(), target_is_directory=True)


def render_ablation_table(results: dict) -> str:
    lines = [f"{'variant':<22}{'mean SROCC':>12}{'std':>10}"]
    for tag, row in results["variants"].items():
        lines.append(f"{tag:<22}{row['mean_srocc']:>12.4f}{row['std_srocc']:>10.4f}")
    return "\n".join(lines)
