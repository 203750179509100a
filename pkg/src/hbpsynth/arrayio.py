"""Flat binary container of named arrays.

Layout (little-endian): magic ``NTC1``, uint32 entry count, then per entry:
uint16 name length, utf-8 name, uint8 dtype code, uint8 ndim, int64 dims,
raw row-major payload.  Writing the same mapping twice produces identical
bytes, so checkpoint round-trips are byte-stable.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"NTC1"

_DTYPE_CODES = {0: np.dtype("<f8"), 1: np.dtype("u1")}
_CODE_FOR_KIND = {"f": 0, "u": 1, "b": 1, "i": 0}


class DataFormatError(ValueError):
    """Raised when a container or dataset file cannot be parsed."""


def write_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        code = _CODE_FOR_KIND.get(arr.dtype.kind)
        if code is None:
            raise DataFormatError(f"entry {name!r}: unsupported dtype {arr.dtype}")
        arr = np.ascontiguousarray(arr.astype(_DTYPE_CODES[code], copy=False))
        name_b = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<BB", code, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}q", *arr.shape))
        chunks.append(arr.tobytes())
    path.write_bytes(b"".join(chunks))


def read_arrays(path) -> dict[str, np.ndarray]:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise DataFormatError(f"{path}: not an array container (bad magic {blob[:4]!r})")
    off = 4
    try:
        (count,) = struct.unpack_from("<I", blob, off)
        off += 4
        out: dict[str, np.ndarray] = {}
        for i in range(count):
            (name_len,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off:off + name_len].decode("utf-8")
            off += name_len
            code, ndim = struct.unpack_from("<BB", blob, off)
            off += 2
            if code not in _DTYPE_CODES:
                raise DataFormatError(f"{path}: entry {name!r} has unknown dtype code {code}")
            dims = struct.unpack_from(f"<{ndim}q", blob, off)
            off += 8 * ndim
            dtype = _DTYPE_CODES[code]
            nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize if ndim else dtype.itemsize
            payload = blob[off:off + nbytes]
            if len(payload) != nbytes:
                raise DataFormatError(f"{path}: entry {name!r} truncated "
                                      f"(wanted {nbytes} bytes, file has {len(payload)})")
            off += nbytes
            out[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
        return out
    except struct.error as exc:
        raise DataFormatError(f"{path}: truncated container ({exc})") from exc


def save_checkpoint(path, params) -> None:
    """Persist named parameter tensors (or arrays) as float64."""
    arrays = {}
    for name, p in params.items():
        arrays[name] = p.data if hasattr(p, "data") else np.asarray(p)
    write_arrays(path, arrays)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    return read_arrays(path)
