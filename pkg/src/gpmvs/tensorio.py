"""GPMV binary tensor files.

Layout: the magic bytes ``GPMV``, a little-endian u32 rank, ``rank`` u32
dimensions, then the row-major data as little-endian float32.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import TensorFormatError

MAGIC = b"GPMV"


def dumps(array) -> bytes:
    a = np.ascontiguousarray(np.asarray(array, dtype="<f4"))
    header = MAGIC + struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return header + a.tobytes()


def loads(buf: bytes) -> np.ndarray:
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise TensorFormatError("missing GPMV magic")
    (rank,) = struct.unpack_from("<I", buf, 4)
    off = 8 + 4 * rank
    if len(buf) < off:
        raise TensorFormatError("truncated GPMV header")
    shape = struct.unpack_from(f"<{rank}I", buf, 8)
    count = int(np.prod(shape, dtype=np.int64))
    if len(buf) != off + 4 * count:
        raise TensorFormatError(
            f"GPMV payload is {len(buf) - off} bytes, expected {4 * count} for shape {shape}"
        )
    return np.frombuffer(buf, dtype="<f4", offset=off, count=count).reshape(shape).astype(np.float32)


def write_tensor(path, array) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(array))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return loads(fh.read())
