"""vqdiag: diagnostic video quality assessment at desk scale.

A full-reference / no-reference video quality model built from a shared
patch-embedding extractor, three domain-expert adapters (spatial, color,
temporal), a two-pathway spatio-temporal aggregator, and a dual head that
emits a global quality score plus a ten-dimensional artifact probability
vector -- together with the synthetic distortion lab, three-stage training
engine, inference pipeline, and evaluation harness that exercise it.
"""

from .frames import Domain, FrameSequence, RangeTag
from .distortions import (
    ARTIFACT_KINDS,
    DOMAIN_KINDS,
    KIND_DOMAIN,
    DistortionKind,
    DistortionSpec,
    apply_chain,
    apply_distortion,
)
from .metrics import (
    auc,
    f1_accuracy_auc,
    normalize_scores,
    plcc,
    psnr,
    srocc,
    ssim_baseline,
)
from .proxies import BUILTIN_PROXIES, ProxyMetricRef, compute_proxy
from .synthesis import (
    PatchPair,
    SyntheticMOS,
    generate_artifact_patches,
    generate_mos_dataset,
    generate_patch_pairs,
    make_source,
    make_sources,
    synthetic_mos,
)
from .model import (
    ModelConfig,
    QualityModel,
    assemble_input,
    score_clip,
    summarize_model,
)
from .losses import artifact_loss, global_loss, rank_loss, total_loss
from .training import (
    TrainConfig,
    lr_schedule,
    run_stage1,
    run_stage2,
    run_stage3,
    stage_plan,
)
from .pipeline import VideoReport, score_video, segment_clips, threshold_diagnostics
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, SynthConfig, load_run_config
from .evaluate import EvalReport, evaluate_artifacts, evaluate_quality

__version__ = "0.1.0"
