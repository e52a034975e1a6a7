"""Checkpoint file format.

    bytes 0..7   magic "DISTRNET"
    bytes 8..11  format version, uint32 little-endian
    bytes 12..15 header length H, uint32 little-endian
    bytes 16..   header: UTF-8 JSON (config, fingerprint, epoch, adam hyperparameters)
    then         parameter tensors, little-endian float32, declaration order
    then         if the header says so: Adam first moments, then second moments,
                 same order and dtype

Everything after the header is raw tensor data; shapes come from the config,
so the file is self-describing and byte-stable for identical inputs.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .adam import AdamState
from .model import ModelConfig, ModelParams, fingerprint, param_shapes

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint", "MAGIC", "FORMAT_VERSION"]

MAGIC = b"DISTRNET"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """A checkpoint file that cannot be read or does not match expectations."""


def save_checkpoint(path, params: ModelParams, adam: AdamState | None = None,
                    epoch: int | None = None) -> None:
    header = {
        "config": params.config.to_dict(),
        "fingerprint": params.fingerprint,
        "epoch": epoch,
        "adam": None,
    }
    if adam is not None:
        header["adam"] = {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2,
                          "eps": adam.eps, "t": adam.t}
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<I", len(blob)), blob]
    for name in params.tensors:
        chunks.append(np.ascontiguousarray(params.tensors[name], dtype="<f4").tobytes())
    if adam is not None:
        for store in (adam.m, adam.v):
            for name in params.tensors:
                chunks.append(np.ascontiguousarray(store[name], dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def _take(buf: memoryview, offset: int, shapes: dict) -> tuple:
    tensors = {}
    for name, shape in shapes.items():
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(buf):
            raise CheckpointError("checkpoint truncated inside tensor data")
        tensors[name] = np.frombuffer(buf[offset:end], dtype="<f4").reshape(shape).copy()
        offset = end
    return tensors, offset


def load_checkpoint(path) -> tuple:
    """Read (ModelParams, AdamState or None, epoch or None) back from disk."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such checkpoint: {p}")
    raw = p.read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise CheckpointError(f"{p}: not a checkpoint file")
    (version,) = struct.unpack("<I", raw[8:12])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{p}: unsupported checkpoint version {version}")
    (hlen,) = struct.unpack("<I", raw[12:16])
    if 16 + hlen > len(raw):
        raise CheckpointError(f"{p}: truncated header")
    try:
        header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{p}: bad checkpoint header: {exc}") from exc
    if header.get("fingerprint") != fingerprint(config):
        raise CheckpointError(f"{p}: fingerprint does not match the stored architecture")
    shapes = param_shapes(config)
    buf = memoryview(raw)
    tensors, offset = _take(buf, 16 + hlen, shapes)
    params = ModelParams(config, tensors)
    adam = None
    if header.get("adam") is not None:
        h = header["adam"]
        m, offset = _take(buf, offset, shapes)
        v, offset = _take(buf, offset, shapes)
        adam = AdamState(lr=h["lr"], beta1=h["beta1"], beta2=h["beta2"], eps=h["eps"],
                         t=int(h["t"]), m=m, v=v)
    if offset != len(raw):
        raise CheckpointError(f"{p}: {len(raw) - offset} trailing bytes")
    return params, adam, header.get("epoch")
