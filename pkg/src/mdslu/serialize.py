"""Flat binary container for named float64 parameters.

Layout (little-endian): magic, u32 entry count, then per entry
u32 name length + utf-8 name, u32 ndim, u32 dims..., raw float64 data.
Writing is fully deterministic, so identical parameters produce
identical bytes, and values round-trip bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor

_MAGIC = b"MDSLUPAR1\n"


def dump_params(named: dict[str, Tensor | np.ndarray]) -> bytes:
    chunks = [_MAGIC, struct.pack("<I", len(named))]
    for name, p in named.items():
        arr = p.data if isinstance(p, Tensor) else np.asarray(p, dtype=np.float64)
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(chunks)


def save_params(path, named: dict[str, Tensor | np.ndarray]) -> None:
    Path(path).write_bytes(dump_params(named))


def parse_params(blob: bytes) -> dict[str, np.ndarray]:
    if not blob.startswith(_MAGIC):
        raise ValueError("not a parameter file (bad magic)")
    off = len(_MAGIC)
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        out[name] = arr.astype(np.float64)  # writable copy
    return out


def load_params(path) -> dict[str, np.ndarray]:
    return parse_params(Path(path).read_bytes())


def assign_params(named: dict[str, Tensor], values: dict[str, np.ndarray]) -> None:
    """Load stored arrays into an existing named-parameter map."""
    missing = sorted(set(named) - set(values))
    extra = sorted(set(values) - set(named))
    if missing or extra:
        raise ValueError(f"parameter names do not match: missing={missing} extra={extra}")
    for name, p in named.items():
        arr = values[name]
        if arr.shape != p.data.shape:
            raise ValueError(
                f"parameter '{name}' shape {arr.shape} does not match model {p.data.shape}")
        p.data = arr.copy()
        p.grad = None
