"""Bit-exact model file format.

Little-endian layout: magic "FKIT", u32 version, u32 tensor count; per
tensor u32 name length + UTF-8 name, u32 rank, rank x u64 extents, f32
row-major payload; then a JSON config block as u64 length + bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

MAGIC = b"FKIT"
VERSION = 1


@dataclass
class ModelBundle:
    tensors: dict[str, np.ndarray]
    config: dict = field(default_factory=dict)
    version: int = VERSION


def save_bundle(bundle: ModelBundle, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", bundle.version, len(bundle.tensors)))
        for name, arr in bundle.tensors.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        cfg = json.dumps(bundle.config, sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<Q", len(cfg)))
        fh.write(cfg)


def load_bundle(path) -> ModelBundle:
    with open(path, "rb") as fh:
        blob = fh.read()

    def take(n, what):
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError(f"{path}: truncated while reading {what} at offset {pos}")
        out = blob[pos:pos + n]
        pos += n
        return out

    pos = 0
    if take(4, "magic") != MAGIC:
        raise FormatError(f"{path}: bad magic, not a model bundle")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} (want {VERSION})")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, "rank"))
        shape = struct.unpack(f"<{rank}Q", take(8 * rank, "extents"))
        numel = int(np.prod(shape)) if rank else 1
        payload = take(4 * numel, f"payload of {name}")
        if name in tensors:
            raise FormatError(f"{path}: duplicate tensor name {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    (cfg_len,) = struct.unpack("<Q", take(8, "config length"))
    config = json.loads(take(cfg_len, "config").decode("utf-8"))
    return ModelBundle(tensors=tensors, config=config, version=version)
