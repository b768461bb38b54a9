import numpy as np
import pytest
import torch

from vqdiag.frames import FrameSequence
from vqdiag.model import ModelConfig
from vqdiag.synthesis import make_source, make_sources

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def sources12():
    """Ten fixed-seed 12-frame sources used across ladder and generator tests."""
    return [make_source(seed=100 + i, frames=12, height=128, width=128) for i in range(10)]


@pytest.fixture(scope="session")
def source_bank():
    return make_sources(6, seed=42, frames=12, height=96, width=96, tag="test")


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def tiny_model_config(**overrides) -> ModelConfig:
    """Small geometry for fast model tests: 32x32 inputs, 4 tokens."""
    base = dict(
        patch_size=16,
        embed_dim=32,
        extractor_depth=1,
        attn_heads=2,
        mlp_ratio=2,
        clip_len=4,
        slow_stride=2,
        dropout=0.1,
    )
    base.update(overrides)
    return ModelConfig(**base)


def random_sequence(rng, t=4, h=32, w=32, bit_depth=8, lo=0, hi=None) -> FrameSequence:
    hi = hi if hi is not None else (1 << bit_depth) - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    frames = rng.integers(lo, hi + 1, size=(t, h, w, 3)).astype(dtype)
    return FrameSequence(frames, bit_depth=bit_depth)
