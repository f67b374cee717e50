"""MVTX: a tiny binary interchange format for token matrices.

Layout (all little-endian):

    bytes 0-3    magic "MVTX"
    bytes 4-5    u16 format version (= 1)
    bytes 6-9    u32 row count
    bytes 10-13  u32 dim
    byte  14     u8 dtype tag (1 = IEEE-754 binary32)
    bytes 15-21  reserved, zero
    ...          payload: rows*dim float32, row-major
    last 4       u32 CRC-32 of the payload

The format is deliberately minimal so embeddings computed by external
encoders (any language) can be dropped in byte-for-byte.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .core import TokenMatrix
from .errors import ChecksumMismatch, FormatError

MAGIC = b"MVTX"
VERSION = 1
DTYPE_F32 = 1
_HEADER = struct.Struct("<4sHIIB7s")


def write_mvtx(path, matrix: TokenMatrix) -> None:
    payload = np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    header = _HEADER.pack(MAGIC, VERSION, matrix.rows, matrix.dim, DTYPE_F32, b"\0" * 7)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def read_mvtx(path) -> TokenMatrix:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size + 4:
        raise FormatError(f"{path}: truncated (got {len(buf)} bytes)")
    magic, version, rows, dim, dtype, _ = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype tag {dtype}")
    need = rows * dim * 4
    if len(buf) != _HEADER.size + need + 4:
        raise FormatError(
            f"{path}: payload sized {len(buf) - _HEADER.size - 4}, expected {need}"
        )
    payload = buf[_HEADER.size : _HEADER.size + need]
    (stored_crc,) = struct.unpack_from("<I", buf, _HEADER.size + need)
    if (zlib.crc32(payload) & 0xFFFFFFFF) != stored_crc:
        raise ChecksumMismatch(f"{path}: payload CRC mismatch")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, dim).astype(np.float32)
    return TokenMatrix(data)
