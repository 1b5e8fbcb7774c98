"""Checkpoint directories: raw little-endian float32 files plus a JSON manifest."""

from __future__ import annotations

import json
import os
import shutil
from pathlib import Path

import numpy as np

from .errors import ContractError

MANIFEST = "manifest.json"
_FLOAT = np.dtype("<f4")


def save_checkpoint(directory, named_tensors, config=None, extra=None) -> Path:
    """Write every tensor; the directory is replaced atomically when complete."""
    directory = Path(directory)
    tmp = directory.with_name(directory.name + ".tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    entries = {}
    for name, t in named_tensors:
        fname = name + ".f32"
        arr = np.asarray(getattr(t, "data", t), dtype=_FLOAT)
        arr.tofile(tmp / fname)
        entries[name] = {"shape": list(arr.shape), "file": fname}
    manifest = {"format": "float32-le", "parameters": entries}
    if extra:
        manifest.update(extra)
    (tmp / MANIFEST).write_text(json.dumps(manifest, indent=1))
    if config is not None:
        config.save(tmp / "config.txt")
    old = directory.with_name(directory.name + ".old")
    if directory.exists():
        if old.exists():
            shutil.rmtree(old)
        os.replace(directory, old)
    os.replace(tmp, directory)
    if old.exists():
        shutil.rmtree(old)
    return directory


def read_checkpoint(directory) -> dict:
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST).read_text())
    out = {}
    for name, entry in manifest["parameters"].items():
        arr = np.fromfile(directory / entry["file"], dtype=_FLOAT)
        shape = tuple(entry["shape"])
        if arr.size != int(np.prod(shape)):
            raise ContractError(f"checkpoint file for {name} has {arr.size} values, manifest says {shape}")
        out[name] = arr.reshape(shape)
    return out


def load_into(named_tensors, arrays: dict, strict: bool = True) -> None:
    """Copy checkpoint arrays into existing tensors matched by name."""
    named = dict(named_tensors)
    if strict:
        missing = sorted(set(named) - set(arrays))
        unexpected = sorted(set(arrays) - set(named))
        if missing or unexpected:
            raise ContractError(f"checkpoint mismatch; missing={missing[:5]} unexpected={unexpected[:5]}")
    for name, t in named.items():
        if name not in arrays:
            continue
        arr = arrays[name]
        if arr.shape != t.shape:
            raise ContractError(f"{name}: checkpoint shape {arr.shape} != parameter shape {t.shape}")
        t.data[...] = arr
