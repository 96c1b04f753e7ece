"""Binary checkpoint container for trained networks.

Layout (all integers little-endian):
  magic "SEDM", u32 version (1),
  u32 JSON length, UTF-8 JSON metadata (model config, vocabulary, and any
  companion settings such as feature extraction and normalization),
  u32 tensor count, then per tensor:
  u16 name length, name bytes, u8 ndim, ndim x u32 dims, float32 data.

Tensors are written sorted by name, so writing what was read reproduces
the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

SEDM_MAGIC = b"SEDM"
SEDM_VERSION = 1


def save_checkpoint(path: str | Path, meta: dict, params: dict[str, np.ndarray]) -> None:
    """Write metadata and named parameter tensors to a SEDM file."""
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [struct.pack("<4sII", SEDM_MAGIC, SEDM_VERSION, len(meta_bytes)), meta_bytes,
             struct.pack("<I", len(params))]
    for name in sorted(params):
        arr = np.asarray(params[name])
        name_bytes = name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise FormatError(f"tensor name too long: {name[:40]}...")
        if arr.ndim > 0xFF:
            raise FormatError(f"tensor {name} has too many dimensions")
        parts.append(struct.pack("<H", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a SEDM file back into (metadata, name -> float64 tensor)."""
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    pos = 0

    def take(n: int, what: str):
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError(f"truncated checkpoint while reading {what}")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    magic, version, meta_len = struct.unpack("<4sII", take(12, "header"))
    if magic != SEDM_MAGIC:
        raise FormatError(f"bad checkpoint magic {bytes(magic)!r}")
    if version != SEDM_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    try:
        meta = json.loads(bytes(take(meta_len, "metadata")).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint metadata: {exc}") from exc

    (n_tensors,) = struct.unpack("<I", take(4, "tensor count"))
    params: dict[str, np.ndarray] = {}
    for i in range(n_tensors):
        (name_len,) = struct.unpack("<H", take(2, f"tensor {i} name length"))
        name = bytes(take(name_len, f"tensor {i} name")).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1, f"tensor {name} ndim"))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, f"tensor {name} dims"))
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        data = take(4 * count, f"tensor {name} data")
        params[name] = np.frombuffer(data, dtype="<f4").reshape(dims).astype(np.float64)
    if pos != len(blob):
        raise FormatError(f"{len(blob) - pos} trailing bytes after last tensor")
    return meta, params
