"""Checkpoint directory format: one raw little-endian array file per
parameter plus a JSON index carrying group membership, shapes, freeze flags,
the model configuration, and stage provenance. Round-trips are bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch

from .errors import ArgumentError
from .model import ModelConfig, QualityModel

INDEX = "index.json"
PARAM_DIR = "params"
FORMAT_VERSION = 1

_DTYPE_STR = {torch.float32: "<f4", torch.float64: "<f8"}
_STR_DTYPE = {v: k for k, v in _DTYPE_STR.items()}


def save_checkpoint(model: QualityModel, directory: str | Path, meta: dict | None = None) -> Path:
    directory = Path(directory)
    (directory / PARAM_DIR).mkdir(parents=True, exist_ok=True)
    groups: dict[str, list[str]] = {}
    params: dict[str, dict] = {}
    for group in model.group_names():
        names = []
        for name, p in model.group_parameters(group):
            dtype = _DTYPE_STR.get(p.dtype)
            if dtype is None:
                raise ArgumentError(f"unsupported parameter dtype {p.dtype}")
            arr = p.detach().cpu().numpy()
            fname = name.replace(".", "__") + ".bin"
            (directory / PARAM_DIR / fname).write_bytes(
                np.ascontiguousarray(arr).astype(dtype).tobytes()
            )
            params[name] = {"shape": list(arr.shape), "dtype": dtype, "file": f"{PARAM_DIR}/{fname}"}
            names.append(name)
        groups[group] = names
    index = {
        "format_version": FORMAT_VERSION,
        "model_config": model.cfg.to_dict(),
        "groups": groups,
        "frozen": dict(model.frozen),
        "stage_history": list(model.stage_history),
        "params": params,
        "meta": meta or {},
    }
    path = directory / INDEX
    path.write_text(json.dumps(index, sort_keys=True, indent=2) + "\n")
    return path


def load_checkpoint(directory: str | Path) -> tuple[QualityModel, dict]:
    directory = Path(directory)
    index_path = directory / INDEX
    if not index_path.exists():
        raise ArgumentError(f"no checkpoint index at {index_path}")
    index = json.loads(index_path.read_text())
    if index.get("format_version") != FORMAT_VERSION:
        raise ArgumentError(f"unsupported checkpoint format {index.get('format_version')}")
    cfg = ModelConfig.from_dict(index["model_config"])
    model = QualityModel(cfg)
    state = dict(model.named_parameters())
    listed = set(index["params"])
    present = set(state)
    if listed != present:
        missing = sorted(present - listed)
        extra = sorted(listed - present)
        raise ArgumentError(f"checkpoint/model mismatch: missing={missing}, extra={extra}")
    with torch.no_grad():
        for name, info in index["params"].items():
            raw = (directory / info["file"]).read_bytes()
            arr = np.frombuffer(raw, dtype=np.dtype(info["dtype"])).reshape(info["shape"])
            tensor = torch.from_numpy(arr.copy()).to(_STR_DTYPE[info["dtype"]])
            if tuple(state[name].shape) != tuple(tensor.shape):
                raise ArgumentError(f"shape mismatch for {name}")
            state[name].data = tensor  # keeps the stored dtype bit-exact
    model.stage_history = list(index.get("stage_history", []))
    for group, flag in index.get("frozen", {}).items():
        model.set_frozen([group], bool(flag))
    return model, index.get("meta", {})


def group_hashes(model: QualityModel) -> dict[str, str]:
    """SHA-256 of each group's concatenated parameter bytes (name-sorted)."""
    out = {}
    for group in model.group_names():
        h = hashlib.sha256()
        for name, p in sorted(model.group_parameters(group)):
            h.update(name.encode())
            h.update(p.detach().cpu().numpy().tobytes())
        out[group] = h.hexdigest()
    return out


def checkpoint_hash(directory: str | Path) -> str:
    """Stable digest of a checkpoint directory (index plus parameter bytes)."""
    directory = Path(directory)
    h = hashlib.sha256()
    h.update((directory / INDEX).read_bytes())
    for path in sorted((directory / PARAM_DIR).glob("*.bin")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()
