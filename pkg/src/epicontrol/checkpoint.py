"""Checkpoint container: named float32 arrays plus a key=value manifest.

A checkpoint is a directory holding ``arrays.bin`` — a flat little-endian
binary container of (name, rank, dims, float32 data) records — and
``manifest.txt`` with the trunk configuration and training seed.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .gnn import GnnConfig

_MAGIC = b"ECKP"
_VERSION = 1
ARRAYS_FILE = "arrays.bin"
MANIFEST_FILE = "manifest.txt"


def _write_manifest(path: Path, cfg: GnnConfig, seed: int) -> None:
    lines = [
        f"format_version = {_VERSION}",
        f"trunk = {cfg.trunk}",
        f"k_layers = {cfg.k_layers}",
        f"d_hidden = {cfg.d_hidden}",
        f"d_in = {cfg.d_in}",
        f"shared_weights = {str(cfg.shared_weights).lower()}",
        f"seed = {seed}",
    ]
    path.write_text("\n".join(lines) + "\n")


def _read_manifest(path: Path) -> dict:
    values = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def save_checkpoint(directory, params: dict, cfg: GnnConfig, seed: int) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / ARRAYS_FILE, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(params)))
        for name in sorted(params):
            arr = np.ascontiguousarray(params[name], dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())
    _write_manifest(directory / MANIFEST_FILE, cfg, seed)
    return directory


def load_checkpoint(directory) -> tuple:
    """Returns (params dict of float64 arrays, GnnConfig, seed)."""
    directory = Path(directory)
    arrays_path = directory / ARRAYS_FILE
    manifest_path = directory / MANIFEST_FILE
    if not arrays_path.exists() or not manifest_path.exists():
        raise ConfigurationError(f"no checkpoint at {directory}")
    manifest = _read_manifest(manifest_path)
    try:
        cfg = GnnConfig(
            k_layers=int(manifest["k_layers"]),
            d_hidden=int(manifest["d_hidden"]),
            d_in=int(manifest["d_in"]),
            shared_weights=manifest["shared_weights"] == "true",
            trunk=manifest["trunk"],
        )
        seed = int(manifest["seed"])
    except KeyError as exc:
        raise ConfigurationError(f"manifest missing key: {exc}") from exc

    params = {}
    with open(arrays_path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ConfigurationError(f"{arrays_path} is not a checkpoint container")
        version, count = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ConfigurationError(f"unsupported checkpoint version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            n_items = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(fh.read(4 * n_items), dtype="<f4")
            params[name] = data.reshape(dims).astype(np.float64)
    return params, cfg, seed
