"""Flat binary tensor files (.sptn).

Layout, all integers little-endian:

    magic   4 bytes  b"SPTN"
    dtype   u8       0 = float32, 1 = int32
    ndim    u8
    dims    ndim * u32
    payload prod(dims) elements, little-endian, C order

Used for latent/hyperlatent grids and embedding matrices.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataError

MAGIC = b"SPTN"

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<i4")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("int32"): 1}


def dump_tensor(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    if arr.dtype not in _DTYPE_CODES:
        raise DataError(f"unsupported tensor dtype {arr.dtype}; use float32 or int32")
    if arr.ndim > 255:
        raise DataError("tensor rank exceeds 255")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim)
    for d in arr.shape:
        out += struct.pack("<I", d)
    out += arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
    return bytes(out)


def parse_tensor(data: bytes) -> np.ndarray:
    if len(data) < 6 or data[:4] != MAGIC:
        raise DataError("not a tensor file (bad magic)")
    code, ndim = struct.unpack_from("<BB", data, 4)
    if code not in _DTYPES:
        raise DataError(f"unknown tensor dtype code {code}")
    offset = 6
    if len(data) < offset + 4 * ndim:
        raise DataError("tensor header truncated")
    dims = struct.unpack_from(f"<{ndim}I", data, offset) if ndim else ()
    offset += 4 * ndim
    dtype = _DTYPES[code]
    count = 1
    for d in dims:
        count *= d
    need = count * dtype.itemsize
    if len(data) - offset != need:
        raise DataError(
            f"tensor payload size mismatch: expected {need} bytes, got {len(data) - offset}"
        )
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return arr.reshape(dims).copy()


def write_tensor(path, arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_tensor(arr))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_tensor(fh.read())
