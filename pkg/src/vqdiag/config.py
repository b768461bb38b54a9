"""Run configuration: one JSON document covering model, training, and
synthesis knobs. Loading is strict -- unknown keys and out-of-range values
are rejected before any work starts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

from .errors import ConfigurationError
from .frames import Domain
from .model import ModelConfig
from .synthesis import UNIFORM_SEVERITY
from .training import TrainConfig

ALL_DOMAINS = tuple(d.value for d in Domain)


@dataclass
class SynthConfig:
    """Desk-scale corpus sizes; defaults match the standard desk profile."""

    source_height: int = 128
    source_width: int = 128
    source_frames: int = 12
    sources_per_domain: int = 24
    val_sources_per_domain: int = 8
    patch_height: int = 64
    patch_width: int = 64
    clip_len: int = 12
    pairs_per_domain: int = 2000
    val_pairs_per_domain: int = 200
    artifact_patches: int = 1000
    val_artifact_patches: int = 300
    mos_videos: int = 300
    val_mos_videos: int = 80
    mos_frames: int = 24
    mos_height: int = 64
    mos_width: int = 64
    pristine_fraction: float = 0.2
    max_artifacts: int = 3
    severity_weights: tuple[float, ...] = UNIFORM_SEVERITY
    hdr_fraction_color: float = 0.5
    source_filter: str = ""  # "", "hd", or "uhd"

    def __post_init__(self):
        for name in (
            "source_height",
            "source_width",
            "source_frames",
            "sources_per_domain",
            "val_sources_per_domain",
            "patch_height",
            "patch_width",
            "clip_len",
            "pairs_per_domain",
            "artifact_patches",
            "mos_videos",
            "mos_frames",
            "mos_height",
            "mos_width",
            "max_artifacts",
        ):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"synth.{name} must be >= 1")
        if self.mos_videos < 2:
            raise ConfigurationError("synth.mos_videos must be >= 2")
        for name in ("pristine_fraction", "hdr_fraction_color"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"synth.{name} must lie in [0, 1]")
        weights = tuple(float(w) for w in self.severity_weights)
        if len(weights) != 5 or any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ConfigurationError("synth.severity_weights must be 5 nonnegative values")
        total = sum(weights)
        self.severity_weights = tuple(w / total for w in weights)
        if self.source_filter not in ("", "hd", "uhd"):
            raise ConfigurationError("synth.source_filter must be '', 'hd', or 'uhd'")


@dataclass
class RunConfig:
    seed: int = 0
    domains: tuple[str, ...] = ALL_DOMAINS
    variant: str = "full"
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        self.domains = tuple(self.domains)
        for d in self.domains:
            if d not in ALL_DOMAINS:
                raise ConfigurationError(f"unknown domain {d!r}")
        if not self.domains:
            raise ConfigurationError("domains must be non-empty")

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "domains": list(self.domains),
            "variant": self.variant,
            "model": self.model.to_dict(),
            "train": asdict(self.train),
            "synth": {
                **asdict(self.synth),
                "severity_weights": list(self.synth.severity_weights),
            },
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n")
        return path


def _build_section(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"section {section!r} must be an object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in {section!r}: {sorted(unknown)}")
    coerced = dict(data)
    for key in ("expert_domains", "severity_weights"):
        if key in coerced and isinstance(coerced[key], list):
            coerced[key] = tuple(coerced[key])
    return cls(**coerced)


def run_config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be a JSON object")
    allowed = {f.name for f in fields(RunConfig)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
    return RunConfig(
        seed=int(data.get("seed", 0)),
        domains=tuple(data.get("domains", ALL_DOMAINS)),
        variant=str(data.get("variant", "full")),
        model=_build_section(ModelConfig, data.get("model", {}), "model"),
        train=_build_section(TrainConfig, data.get("train", {}), "train"),
        synth=_build_section(SynthConfig, data.get("synth", {}), "synth"),
    )


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"{path}: invalid JSON ({err})") from None
    return run_config_from_dict(data)


def config_diff(a: RunConfig, b: RunConfig) -> dict[str, tuple]:
    """Dotted-path map of every field where the two configs disagree."""

    def walk(da, db, prefix=""):
        out = {}
        for key in sorted(set(da) | set(db)):
            va, vb = da.get(key), db.get(key)
            path = f"{prefix}{key}"
            if isinstance(va, dict) and isinstance(vb, dict):
                out.update(walk(va, vb, path + "."))
            elif va != vb:
                out[path] = (va, vb)
        return out

    return walk(a.to_json_dict(), b.to_json_dict())
