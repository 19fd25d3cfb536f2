"""Checkpoint container: a directory holding a manifest, one little-endian
row-major binary file per tensor, and the vocabulary."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from argscore.model.config import ModelConfig
from argscore.model.network import ModelParameters
from argscore.model.vocab import Vocabulary

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def _file_name(name: str) -> str:
    return name.replace(".", "__") + ".bin"


def write_tensors(directory: Path, tensors: dict[str, np.ndarray]) -> list[dict]:
    entries = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        file_name = _file_name(name)
        little = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        (directory / file_name).write_bytes(little.tobytes(order="C"))
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": arr.dtype.name,
            "file": file_name,
        })
    return entries


def read_tensors(directory: Path, entries: list[dict]) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    for entry in entries:
        path = directory / entry["file"]
        if not path.exists():
            raise CheckpointError(f"missing tensor file {path}")
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        flat = np.frombuffer(path.read_bytes(), dtype=dtype)
        arr = flat.reshape(entry["shape"]).astype(np.float64)
        tensors[entry["name"]] = arr
    return tensors


def save_checkpoint(
    directory: str | Path,
    params: ModelParameters,
    config: ModelConfig,
    vocab: Vocabulary,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = write_tensors(directory, params.tensors)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "vocab_sha256": vocab.sha256(),
        "tensors": entries,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )
    vocab.save(directory / "vocab.txt")


def load_checkpoint(directory: str | Path) -> tuple[ModelParameters, ModelConfig, Vocabulary]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise CheckpointError(f"no manifest.json under {directory}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format version {manifest.get('format_version')}")
    config = ModelConfig.from_dict(manifest["config"])
    vocab = Vocabulary.load(directory / "vocab.txt")
    if vocab.sha256() != manifest["vocab_sha256"]:
        raise CheckpointError(
            f"vocab hash mismatch: file {vocab.sha256()} vs manifest {manifest['vocab_sha256']}"
        )
    tensors = read_tensors(directory, manifest["tensors"])
    return ModelParameters(tensors), config, vocab
