"""The quality model graph: shared extractor, domain-expert adapters,
two-pathway spatio-temporal aggregator, and the dual prediction head.

Routing is a training-time construct: a batch tagged with a domain passes
through that domain's adapter only (the other adapters are never read, so
their gradients are exactly zero). At inference every expert runs and the
aggregator consumes the spatial and color streams on its slow pathway and
the temporal stream on its fast pathway.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ArgumentError, ConfigurationError
from .frames import Domain, FrameSequence

ROLES = ("spatial", "color", "temporal")
SHARED_EXPERT = "shared"

GROUP_EXTRACTOR = "extractor"
GROUP_AGGREGATOR = "aggregator"
GROUP_HEAD_Q = "head_q"
GROUP_HEAD_A = "head_a"


def expert_group(name: str) -> str:
    return f"expert_{name}"


@dataclass(frozen=True)
class ModelConfig:
    patch_size: int = 16
    embed_dim: int = 64
    extractor_depth: int = 2
    attn_heads: int = 4
    mlp_ratio: int = 2
    num_experts: int = 3
    adapter_bottleneck: int = 0  # 0 -> embed_dim // 4
    artifact_dim: int = 10
    mode: str = "FR"
    clip_len: int = 12
    slow_stride: int = 4
    fast_stride: int = 1
    slow_width: int = 0  # 0 -> 2 * embed_dim
    fast_width: int = 0  # 0 -> embed_dim // 2
    head_hidden: int = 0  # 0 -> embed_dim
    dropout: float = 0.1
    aggregator: str = "two_pathway"  # or "temporal_conv" (ablation variant)
    expert_domains: tuple[str, ...] = ()  # () -> derived from num_experts

    def __post_init__(self):
        if self.mode not in ("FR", "NR"):
            raise ConfigurationError(f"mode must be FR or NR, got {self.mode!r}")
        if self.num_experts < 1:
            raise ConfigurationError("num_experts must be >= 1")
        if self.embed_dim % self.attn_heads:
            raise ConfigurationError("embed_dim must be divisible by attn_heads")
        if self.embed_dim % 4:
            raise ConfigurationError("embed_dim must be divisible by 4 (2-D positions)")
        if self.clip_len % self.slow_stride:
            raise ConfigurationError("clip_len must be divisible by slow_stride")
        if self.slow_stride % self.fast_stride:
            raise ConfigurationError("slow_stride must be divisible by fast_stride")
        if self.artifact_dim < 1:
            raise ConfigurationError("artifact_dim must be >= 1")
        if self.aggregator not in ("two_pathway", "temporal_conv"):
            raise ConfigurationError(f"unknown aggregator {self.aggregator!r}")
        if not self.expert_domains:
            derived = {1: (SHARED_EXPERT,), 2: ROLES[:2], 3: ROLES}.get(self.num_experts)
            if derived is None:
                raise ConfigurationError(
                    "num_experts > 3 requires explicit expert_domains"
                )
            object.__setattr__(self, "expert_domains", tuple(derived))
        if len(self.expert_domains) != self.num_experts:
            raise ConfigurationError("expert_domains length must equal num_experts")
        for name in self.expert_domains:
            if name != SHARED_EXPERT and name not in ROLES:
                raise ConfigurationError(f"unknown expert domain {name!r}")
        if len(set(self.expert_domains)) != self.num_experts:
            raise ConfigurationError("expert_domains must be unique")
        if self.bottleneck >= self.embed_dim:
            raise ConfigurationError("adapter_bottleneck must be < embed_dim")
        if self.dropout < 0.0 or self.dropout >= 1.0:
            raise ConfigurationError("dropout must be in [0, 1)")

    @property
    def in_channels(self) -> int:
        return 9 if self.mode == "FR" else 3

    @property
    def bottleneck(self) -> int:
        return self.adapter_bottleneck or self.embed_dim // 4

    @property
    def slow_dim(self) -> int:
        return self.slow_width or 2 * self.embed_dim

    @property
    def fast_dim(self) -> int:
        return self.fast_width or self.embed_dim // 2

    @property
    def z_dim(self) -> int:
        return self.slow_dim + self.fast_dim

    @property
    def head_dim(self) -> int:
        return self.head_hidden or self.embed_dim

    def to_dict(self) -> dict:
        d = asdict(self)
        d["expert_domains"] = list(self.expert_domains)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["expert_domains"] = tuple(d.get("expert_domains", ()))
        return ModelConfig(**d)


@lru_cache(maxsize=32)
def sincos_position_encoding(grid_h: int, grid_w: int, dim: int) -> torch.Tensor:
    """Parameter-free 2-D sin-cos token positions; works for any grid size."""
    if dim % 4:
        raise ConfigurationError("embed_dim must be divisible by 4 for 2-D positions")
    half = dim // 2

    def axis(positions: np.ndarray) -> np.ndarray:
        omega = 1.0 / (10000.0 ** (np.arange(half // 2, dtype=np.float64) / (half // 2)))
        angles = np.outer(positions, omega)
        return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)

    ys, xs = np.mgrid[0:grid_h, 0:grid_w]
    enc = np.concatenate([axis(ys.reshape(-1)), axis(xs.reshape(-1))], axis=1)
    return torch.from_numpy(enc.astype(np.float32))


class TransformerBlock(nn.Module):
    """Pre-norm encoder block: attention then an MLP, both residual."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.embed_dim
        self.norm1 = nn.LayerNorm(d)
        self.attn = nn.MultiheadAttention(d, cfg.attn_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(d)
        self.mlp = nn.Sequential(
            nn.Linear(d, cfg.mlp_ratio * d), nn.GELU(), nn.Linear(cfg.mlp_ratio * d, d)
        )

    def forward(self, x):
        h = self.norm1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        return x + self.mlp(self.norm2(x))


class FeatureExtractor(nn.Module):
    """Non-overlapping patch projection plus shared transformer blocks,
    applied frame by frame."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.proj = nn.Conv2d(cfg.in_channels, cfg.embed_dim, cfg.patch_size, cfg.patch_size)
        self.blocks = nn.ModuleList(TransformerBlock(cfg) for _ in range(cfg.extractor_depth))
        self.norm = nn.LayerNorm(cfg.embed_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, T, C, H, W) -> (B, T, P, D); H and W must be patch multiples."""
        if x.ndim != 5:
            raise ArgumentError(f"expected (B, T, C, H, W), got {tuple(x.shape)}")
        b, t, c, h, w = x.shape
        ps = self.cfg.patch_size
        if h % ps or w % ps:
            raise ArgumentError(f"geometry {h}x{w} not divisible by patch size {ps}")
        if c != self.cfg.in_channels:
            raise ArgumentError(
                f"{self.cfg.mode} mode expects {self.cfg.in_channels} channels, got {c}"
            )
        tokens = self.proj(x.reshape(b * t, c, h, w)).flatten(2).transpose(1, 2)
        pos = sincos_position_encoding(h // ps, w // ps, self.cfg.embed_dim)
        tokens = tokens + pos.to(dtype=tokens.dtype, device=tokens.device)
        for block in self.blocks:
            tokens = block(tokens)
        tokens = self.norm(tokens)
        return tokens.reshape(b, t, tokens.shape[1], self.cfg.embed_dim)


class BottleneckAdapter(nn.Module):
    """Residual down/up projection; zero-initialized up projection makes the
    module an exact identity at initialization."""

    def __init__(self, dim: int, bottleneck: int):
        super().__init__()
        self.down = nn.Linear(dim, bottleneck)
        self.act = nn.GELU()
        self.up = nn.Linear(bottleneck, dim)
        nn.init.zeros_(self.up.weight)
        nn.init.zeros_(self.up.bias)

    def forward(self, x):
        return x + self.up(self.act(self.down(x)))


def _temporal_conv(x: torch.Tensor, conv: nn.Conv1d) -> torch.Tensor:
    """Apply a Conv1d along the frame axis of (B, T, P, C), per token."""
    b, t, p, c = x.shape
    y = x.permute(0, 2, 3, 1).reshape(b * p, c, t)
    y = conv(y)
    return y.reshape(b, p, y.shape[1], t).permute(0, 3, 1, 2)


class TwoPathwayAggregator(nn.Module):
    """Slow/fast fusion of the expert streams.

    The slow pathway reads the channel-concatenated spatial+color streams at
    a coarse temporal stride; the fast pathway reads the temporal stream at
    full rate. One lateral connection pools fast features down to the slow
    stride and concatenates them at mid-depth. Both pathways end in global
    average pooling over frames and tokens; z is their concatenation.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d, sw, fw = cfg.embed_dim, cfg.slow_dim, cfg.fast_dim
        self.slow_in = nn.Linear(2 * d, sw)
        self.slow_conv1 = nn.Conv1d(sw, sw, 3, padding=1)
        self.lateral = nn.Linear(fw, fw)
        self.slow_mix = nn.Linear(sw + fw, sw)
        self.slow_conv2 = nn.Conv1d(sw, sw, 3, padding=1)
        self.fast_in = nn.Linear(d, fw)
        self.fast_conv1 = nn.Conv1d(fw, fw, 3, padding=1)
        self.fast_conv2 = nn.Conv1d(fw, fw, 3, padding=1)

    def forward(self, spatial_feats, color_feats, temporal_feats) -> torch.Tensor:
        cfg = self.cfg
        t = spatial_feats.shape[1]
        if t % cfg.slow_stride:
            raise ArgumentError(f"{t} frames not divisible by slow stride {cfg.slow_stride}")
        slow = torch.cat([spatial_feats, color_feats], dim=-1)[:, :: cfg.slow_stride]
        fast = temporal_feats[:, :: cfg.fast_stride]

        slow = F.gelu(_temporal_conv(self.slow_in(slow), self.slow_conv1))
        fast = F.gelu(_temporal_conv(self.fast_in(fast), self.fast_conv1))

        b, tf, p, fw = fast.shape
        ts = slow.shape[1]
        pooled = fast.reshape(b, ts, tf // ts, p, fw).mean(dim=2)
        slow = self.slow_mix(torch.cat([slow, self.lateral(pooled)], dim=-1))
        slow = F.gelu(_temporal_conv(slow, self.slow_conv2))
        fast = F.gelu(_temporal_conv(fast, self.fast_conv2))
        return torch.cat([slow.mean(dim=(1, 2)), fast.mean(dim=(1, 2))], dim=-1)


class TemporalConvAggregator(nn.Module):
    """Ablation aggregator: plain temporal convolution stack over the
    channel-concatenated expert streams, no pathways, no lateral exchange."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        width = cfg.z_dim
        self.proj = nn.Linear(3 * cfg.embed_dim, width)
        self.conv1 = nn.Conv1d(width, width, 3, padding=1)
        self.conv2 = nn.Conv1d(width, width, 3, padding=1)

    def forward(self, spatial_feats, color_feats, temporal_feats) -> torch.Tensor:
        x = torch.cat([spatial_feats, color_feats, temporal_feats], dim=-1)
        x = F.gelu(_temporal_conv(self.proj(x), self.conv1))
        x = F.gelu(_temporal_conv(x, self.conv2))
        return x.mean(dim=(1, 2))


def _mlp_head(z_dim: int, hidden: int, out: int, dropout: float) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(z_dim, hidden),
        nn.GELU(),
        nn.Dropout(dropout),
        nn.Linear(hidden, hidden),
        nn.GELU(),
        nn.Dropout(dropout),
        nn.Linear(hidden, out),
    )


class QualityModel(nn.Module):
    """Full model state: all parameter groups plus freeze flags and the
    record of completed training stages."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.extractor = FeatureExtractor(cfg)
        self.experts = nn.ModuleDict(
            {name: BottleneckAdapter(cfg.embed_dim, cfg.bottleneck) for name in cfg.expert_domains}
        )
        if cfg.aggregator == "two_pathway":
            self.aggregator: nn.Module = TwoPathwayAggregator(cfg)
        else:
            self.aggregator = TemporalConvAggregator(cfg)
        self.head_q = _mlp_head(cfg.z_dim, cfg.head_dim, 1, cfg.dropout)
        self.head_a = _mlp_head(cfg.z_dim, cfg.head_dim, cfg.artifact_dim, cfg.dropout)
        self.frozen: dict[str, bool] = {g: False for g in self.group_names()}
        self.stage_history: list[str] = []

    # -- parameter-group bookkeeping ------------------------------------

    def group_names(self) -> tuple[str, ...]:
        return (
            GROUP_EXTRACTOR,
            *(expert_group(n) for n in self.cfg.expert_domains),
            GROUP_AGGREGATOR,
            GROUP_HEAD_Q,
            GROUP_HEAD_A,
        )

    def group_module(self, group: str) -> nn.Module:
        if group == GROUP_EXTRACTOR:
            return self.extractor
        if group == GROUP_AGGREGATOR:
            return self.aggregator
        if group == GROUP_HEAD_Q:
            return self.head_q
        if group == GROUP_HEAD_A:
            return self.head_a
        if group.startswith("expert_") and group[len("expert_") :] in self.experts:
            return self.experts[group[len("expert_") :]]
        raise ArgumentError(f"unknown parameter group {group!r}")

    def group_parameters(self, group: str) -> list[tuple[str, nn.Parameter]]:
        """Named parameters of one group, with their full model paths."""
        if group.startswith("expert_"):
            prefix = f"experts.{group[len('expert_'):]}"
        else:
            prefix = group
        return list(self.group_module(group).named_parameters(prefix=prefix))

    def set_frozen(self, groups, flag: bool = True):
        for group in groups:
            self.frozen[group] = flag
            for _, p in self.group_parameters(group):
                p.requires_grad_(not flag)

    def apply_freeze_plan(self, trainable: set[str], frozen: set[str]):
        known = set(self.group_names())
        unknown = (trainable | frozen) - known
        if unknown:
            raise ArgumentError(f"unknown groups in freeze plan: {sorted(unknown)}")
        self.set_frozen(frozen, True)
        self.set_frozen(trainable, False)

    def trainable_parameters(self) -> list[nn.Parameter]:
        return [
            p
            for g in self.group_names()
            if not self.frozen[g]
            for _, p in self.group_parameters(g)
        ]

    # -- forward pieces ---------------------------------------------------

    def _expert_name_for(self, role: str) -> str | None:
        if role in self.experts:
            return role
        if SHARED_EXPERT in self.experts:
            return SHARED_EXPERT
        return None

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        return self.extractor(x)

    def route_expert(self, embeddings: torch.Tensor, domain: Domain | str) -> torch.Tensor:
        """Apply exactly the matching adapter; other experts are not read."""
        name = self._expert_name_for(Domain(domain).value)
        if name is None:
            return embeddings
        return self.experts[name](embeddings)

    def expert_features(self, embeddings: torch.Tensor, domain=None) -> dict[str, torch.Tensor]:
        """Per-role streams feeding the aggregator.

        With a training-time ``domain``, only that domain's stream is adapted
        and the others pass through unadapted; with ``domain=None`` (inference)
        every role runs its expert.
        """
        if domain is None:
            out = {}
            for role in ROLES:
                name = self._expert_name_for(role)
                out[role] = self.experts[name](embeddings) if name else embeddings
            return out
        routed = Domain(domain).value
        feats = {role: embeddings for role in ROLES}
        feats[routed] = self.route_expert(embeddings, routed)
        return feats

    def fuse(self, feats: dict[str, torch.Tensor]) -> torch.Tensor:
        return self.aggregator(feats["spatial"], feats["color"], feats["temporal"])

    def predict(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        q = self.head_q(z).squeeze(-1)
        a = torch.sigmoid(self.head_a(z))
        return q, a

    def forward(self, x: torch.Tensor, domain=None) -> tuple[torch.Tensor, torch.Tensor]:
        z = self.fuse(self.expert_features(self.embed(x), domain))
        return self.predict(z)


# ---------------------------------------------------------------------------
# Input assembly and scoring helpers


def assemble_input(
    dist: FrameSequence, ref: FrameSequence | None, mode: str
) -> np.ndarray:
    """Model input in normalized [0, 1] units, channels-first (T, C, H, W):
    the distorted clip alone for NR (C=3), or the channel concatenation
    (dist, ref, dist - ref) for FR (C=9). The residual is signed, in
    [-1, 1], and exact: integer sample differences divided once by the peak.
    """
    maxv = np.float32(dist.max_value)
    d = np.moveaxis(dist.frames, 3, 1).astype(np.float32)
    if mode == "NR":
        if ref is not None:
            raise ArgumentError("NR mode takes no reference")
        d /= maxv
        return d
    if mode == "FR":
        if ref is None:
            raise ArgumentError("FR mode requires a reference")
        if not dist.same_geometry(ref) or dist.bit_depth != ref.bit_depth:
            raise ArgumentError("FR reference must match the distorted clip's geometry")
        r = np.moveaxis(ref.frames, 3, 1).astype(np.float32)
        t, _, h, w = d.shape
        out = np.empty((t, 9, h, w), dtype=np.float32)
        out[:, 0:3] = d / maxv
        out[:, 3:6] = r / maxv
        out[:, 6:9] = (d - r) / maxv
        return out
    raise ArgumentError(f"mode must be FR or NR, got {mode!r}")


def clips_to_tensor(clips: list[np.ndarray]) -> torch.Tensor:
    """Stack assembled (T, C, H, W) clips into a (B, T, C, H, W) batch."""
    return torch.from_numpy(np.stack(clips, axis=0))


def score_clip(
    model: QualityModel,
    dist: FrameSequence,
    ref: FrameSequence | None = None,
    domain=None,
) -> tuple[float, np.ndarray]:
    """Single-clip eval-mode forward; returns (quality score, artifact vector)."""
    model.eval()
    x = clips_to_tensor([assemble_input(dist, ref, model.cfg.mode)])
    with torch.no_grad():
        q, a = model(x, domain)
    return float(q[0].item()), a[0].numpy().astype(np.float64)


# ---------------------------------------------------------------------------
# Size reporting


def count_parameters(model: QualityModel) -> dict[str, int]:
    counts = {g: sum(p.numel() for _, p in model.group_parameters(g)) for g in model.group_names()}
    counts["total"] = sum(counts.values())
    return counts


def estimate_clip_macs(cfg: ModelConfig, height: int = 64, width: int = 64) -> int:
    """Approximate multiply-accumulates for one clip forward at inference
    (all experts active), from layer dimensions."""
    t, d = cfg.clip_len, cfg.embed_dim
    p = (height // cfg.patch_size) * (width // cfg.patch_size)
    macs = t * p * cfg.patch_size**2 * cfg.in_channels * d  # patch projection
    per_block = 4 * t * p * d * d + 2 * t * p * p * d + 2 * t * p * d * (cfg.mlp_ratio * d)
    macs += cfg.extractor_depth * per_block
    macs += len(cfg.expert_domains) * 2 * t * p * d * cfg.bottleneck
    sw, fw = cfg.slow_dim, cfg.fast_dim
    ts, tf = t // cfg.slow_stride, t // cfg.fast_stride
    if cfg.aggregator == "two_pathway":
        macs += ts * p * (2 * d * sw + 3 * sw * sw + (sw + fw) * sw + 3 * sw * sw + fw * fw)
        macs += tf * p * (d * fw + 3 * fw * fw + 3 * fw * fw)
    else:
        z = cfg.z_dim
        macs += t * p * (3 * d * z + 3 * z * z + 3 * z * z)
    h = cfg.head_dim
    macs += cfg.z_dim * h + h * h + h * 1
    macs += cfg.z_dim * h + h * h + h * cfg.artifact_dim
    return int(macs)


def summarize_model(model: QualityModel, height: int = 64, width: int = 64) -> dict:
    """Parameter counts per group plus an analytic per-clip MAC estimate."""
    counts = count_parameters(model)
    return {
        "parameter_counts": counts,
        "macs_per_clip": estimate_clip_macs(model.cfg, height, width),
        "input_geometry": [model.cfg.clip_len, height, width, model.cfg.in_channels],
        "z_dim": model.cfg.z_dim,
        "frozen": dict(model.frozen),
    }
