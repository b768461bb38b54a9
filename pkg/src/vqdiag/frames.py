"""Decoded video segments, perceptual domain tags, and the raw on-disk clip format.

A clip on disk is a pair of files sharing a stem: ``<stem>.raw`` holds the
little-endian sample array in C order, ``<stem>.json`` holds the header
(shape, dtype, bit depth, frame rate, range tag) plus an optional provenance
record listing the distortions applied to produce the clip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ArgumentError

MIN_SIDE = 16


class Domain(str, Enum):
    """The three fixed perceptual domains served by the expert adapters."""

    SPATIAL = "spatial"
    COLOR = "color"
    TEMPORAL = "temporal"


class RangeTag(str, Enum):
    SDR = "SDR"
    HDR_LIKE = "HDR-like"


_DTYPES = {8: np.dtype("<u1"), 10: np.dtype("<u2")}


@dataclass(frozen=True)
class FrameSequence:
    """A decoded video segment: samples plus geometry and signal metadata.

    ``frames`` is a (T, H, W, 3) integer array with every sample in
    [0, 2**bit_depth - 1]. Instances are treated as immutable.
    """

    frames: np.ndarray
    bit_depth: int = 8
    frame_rate: float = 30.0
    range_tag: RangeTag = RangeTag.SDR

    def __post_init__(self):
        f = self.frames
        if self.bit_depth not in _DTYPES:
            raise ArgumentError(f"bit_depth must be 8 or 10, got {self.bit_depth}")
        if f.ndim != 4 or f.shape[3] != 3:
            raise ArgumentError(f"frames must be (T, H, W, 3), got {f.shape}")
        t, h, w, _ = f.shape
        if t < 1 or h < MIN_SIDE or w < MIN_SIDE:
            raise ArgumentError(f"need T >= 1 and H, W >= {MIN_SIDE}, got {f.shape}")
        if not np.issubdtype(f.dtype, np.integer):
            raise ArgumentError(f"frames must be integer samples, got dtype {f.dtype}")
        if f.size and int(f.max()) > self.max_value:
            raise ArgumentError(
                f"sample {int(f.max())} exceeds {self.max_value} for {self.bit_depth}-bit"
            )
        expected = _DTYPES[self.bit_depth]
        if f.dtype != expected:
            object.__setattr__(self, "frames", f.astype(expected))

    @property
    def t(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    def geometry(self) -> tuple[int, int, int]:
        return (self.t, self.height, self.width)

    def as_float(self) -> np.ndarray:
        """Samples normalized to [0, 1] as float64."""
        return self.frames.astype(np.float64) / self.max_value

    def with_frames(self, frames: np.ndarray) -> "FrameSequence":
        """New sequence with the same metadata and replaced samples."""
        return FrameSequence(frames, self.bit_depth, self.frame_rate, self.range_tag)

    def same_geometry(self, other: "FrameSequence") -> bool:
        return self.frames.shape == other.frames.shape


def from_float(
    values: np.ndarray,
    bit_depth: int = 8,
    frame_rate: float = 30.0,
    range_tag: RangeTag = RangeTag.SDR,
) -> FrameSequence:
    """Quantize normalized [0, 1] float samples onto the integer grid."""
    maxv = (1 << bit_depth) - 1
    q = np.clip(np.rint(values * maxv), 0, maxv).astype(_DTYPES[bit_depth])
    return FrameSequence(q, bit_depth, frame_rate, range_tag)


def crop(seq: FrameSequence, top: int, left: int, height: int, width: int) -> FrameSequence:
    if top < 0 or left < 0 or top + height > seq.height or left + width > seq.width:
        raise ArgumentError(
            f"crop ({top},{left},{height},{width}) outside {seq.height}x{seq.width}"
        )
    return seq.with_frames(seq.frames[:, top : top + height, left : left + width].copy())


def center_crop_multiple(seq: FrameSequence, multiple: int) -> FrameSequence:
    """Center-crop H and W to the nearest lower multiple of ``multiple``."""
    h = (seq.height // multiple) * multiple
    w = (seq.width // multiple) * multiple
    if h < multiple or w < multiple:
        raise ArgumentError(f"{seq.height}x{seq.width} smaller than one {multiple}px patch")
    top = (seq.height - h) // 2
    left = (seq.width - w) // 2
    if (top, left, h, w) == (0, 0, seq.height, seq.width):
        return seq
    return crop(seq, top, left, h, w)


# ---------------------------------------------------------------------------
# Raw on-disk format


def save_raw(seq: FrameSequence, stem: str | Path, distortions: list[dict] | None = None) -> Path:
    """Write ``<stem>.raw`` + ``<stem>.json``; returns the header path."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(seq.frames, dtype=_DTYPES[seq.bit_depth])
    (stem.with_suffix(".raw")).write_bytes(arr.tobytes())
    header = {
        "shape": list(arr.shape),
        "dtype": _DTYPES[seq.bit_depth].str,
        "bit_depth": seq.bit_depth,
        "frame_rate": seq.frame_rate,
        "range_tag": seq.range_tag.value,
    }
    if distortions is not None:
        header["distortions"] = distortions
    path = stem.with_suffix(".json")
    path.write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")
    return path


def load_raw(stem: str | Path) -> FrameSequence:
    seq, _ = load_raw_with_header(stem)
    return seq


def load_raw_with_header(stem: str | Path) -> tuple[FrameSequence, dict]:
    stem = Path(stem)
    if stem.suffix == ".json":
        stem = stem.with_suffix("")
    header = json.loads(stem.with_suffix(".json").read_text())
    dtype = np.dtype(header["dtype"])
    shape = tuple(header["shape"])
    data = np.frombuffer(stem.with_suffix(".raw").read_bytes(), dtype=dtype).reshape(shape)
    seq = FrameSequence(
        data.copy(),
        bit_depth=header["bit_depth"],
        frame_rate=header["frame_rate"],
        range_tag=RangeTag(header["range_tag"]),
    )
    return seq, header


# ---------------------------------------------------------------------------
# PNG-directory ingestion

PNG_MANIFEST = "frames.json"


def load_png_dir(directory: str | Path) -> FrameSequence:
    """Load a directory of per-frame PNGs.

    The directory may carry a ``frames.json`` manifest ({"frame_rate": ...,
    "files": [...]}); without one, all ``*.png`` files are used in sorted
    order at 30 fps. Only 8-bit RGB PNGs are supported; 10-bit content uses
    the raw format.
    """
    from PIL import Image

    directory = Path(directory)
    frame_rate = 30.0
    manifest = directory / PNG_MANIFEST
    if manifest.exists():
        meta = json.loads(manifest.read_text())
        frame_rate = float(meta.get("frame_rate", 30.0))
        files = [directory / name for name in meta["files"]]
    else:
        files = sorted(directory.glob("*.png"))
    if not files:
        raise ArgumentError(f"no PNG frames found in {directory}")
    frames = []
    for path in files:
        with Image.open(path) as img:
            frames.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
    stacked = np.stack(frames, axis=0)
    return FrameSequence(stacked, bit_depth=8, frame_rate=frame_rate)


def save_png_dir(seq: FrameSequence, directory: str | Path) -> Path:
    """Write a sequence as numbered PNGs plus a manifest (8-bit only)."""
    from PIL import Image

    if seq.bit_depth != 8:
        raise ArgumentError("PNG export supports 8-bit sequences only")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(seq.t):
        name = f"frame_{i:05d}.png"
        Image.fromarray(seq.frames[i]).save(directory / name)
        names.append(name)
    manifest = directory / PNG_MANIFEST
    manifest.write_text(
        json.dumps({"frame_rate": seq.frame_rate, "files": names}, indent=2) + "\n"
    )
    return manifest
