"""Binary tensor and checkpoint formats.

Tensor blob: magic ``AVCT``, version u32 (=1), ndim u32, dims as u64,
payload as float32, all little-endian, row-major. Checkpoint: magic
``AVCK`` followed by repeated (name-length u32, UTF-8 name, tensor blob).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

TENSOR_MAGIC = b"AVCT"
CHECKPOINT_MAGIC = b"AVCK"
VERSION = 1


def tensor_to_bytes(array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array, dtype=np.float32)
    header = struct.pack("<4sII", TENSOR_MAGIC, VERSION, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    payload = arr.astype("<f4").tobytes()
    return header + dims + payload


def tensor_from_bytes(blob: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one tensor blob; returns (array, next offset)."""
    magic, version, ndim = struct.unpack_from("<4sII", blob, offset)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported tensor version {version}")
    offset += 12
    dims = struct.unpack_from(f"<{ndim}Q", blob, offset) if ndim else ()
    offset += 8 * ndim
    count = int(np.prod(dims)) if ndim else 1
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    offset += 4 * count
    return data.reshape(dims).astype(np.float32), offset


def save_tensor(path, array: np.ndarray):
    Path(path).write_bytes(tensor_to_bytes(array))


def load_tensor(path) -> np.ndarray:
    arr, _ = tensor_from_bytes(Path(path).read_bytes())
    return arr


def checkpoint_to_bytes(state: dict[str, np.ndarray]) -> bytes:
    parts = [CHECKPOINT_MAGIC]
    for name, array in state.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(tensor_to_bytes(array))
    return b"".join(parts)


def checkpoint_from_bytes(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic {blob[:4]!r}")
    offset = 4
    state: dict[str, np.ndarray] = {}
    while offset < len(blob):
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        name = blob[offset: offset + name_len].decode("utf-8")
        offset += name_len
        array, offset = tensor_from_bytes(blob, offset)
        state[name] = array
    return state


def save_checkpoint(path, state: dict[str, np.ndarray]):
    Path(path).write_bytes(checkpoint_to_bytes(state))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    return checkpoint_from_bytes(Path(path).read_bytes())
