"""Binary tensor files and per-model manifests.

Format: magic ``GNNH``, one version byte (1), unsigned 32-bit little-endian
rows and cols, then rows*cols IEEE-754 float32 little-endian values in
row-major order. One file per tensor. A manifest is a JSON object naming the
tensor files of a model: ``{"model": ..., "tensors": {name: relative path}}``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"GNNH"
VERSION = 1


class TensorFormatError(ValueError):
    pass


def save_tensor(arr: np.ndarray, path: str | Path) -> None:
    a = np.asarray(arr, dtype=np.float32)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise TensorFormatError(f"tensors are 2-D on disk, got shape {arr.shape}")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(bytes([VERSION]))
        f.write(struct.pack("<II", a.shape[0], a.shape[1]))
        f.write(a.astype("<f4").tobytes())


def load_tensor(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic {data[:4]!r}")
    if data[4] != VERSION:
        raise TensorFormatError(f"{path}: unsupported version {data[4]}")
    rows, cols = struct.unpack_from("<II", data, 5)
    payload = data[13:]
    expected = rows * cols * 4
    if len(payload) != expected:
        raise TensorFormatError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()


def save_manifest(model: str, tensors: dict[str, np.ndarray], directory: str | Path) -> Path:
    """Write one file per tensor plus ``manifest.json`` in ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, arr in tensors.items():
        fname = f"{name}.gnnh"
        save_tensor(arr, directory / fname)
        entries[name] = fname
    manifest = {"model": model, "tensors": entries}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path: str | Path) -> tuple[str, dict[str, np.ndarray]]:
    path = Path(path)
    obj = json.loads(path.read_text())
    tensors = {name: load_tensor(path.parent / fname)
               for name, fname in obj["tensors"].items()}
    return obj["model"], tensors
