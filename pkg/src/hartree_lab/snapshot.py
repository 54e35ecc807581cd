"""Binary field snapshots.

Layout, little-endian::

    b"HRT5" | u16 version=1 | u16 flags | u32 d | u32 n | f64 L | f64 t
    | n^d complex values as (re, im) f64 pairs, row-major | u32 crc32(payload)

Flag bit 0 marks frequency-representation data. The checksum covers the
complex payload only.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .spectral import FREQUENCY, PHYSICAL, Field, Grid

MAGIC = b"HRT5"
VERSION = 1
HEADER = struct.Struct("<4sHHIIdd")
FLAG_FREQUENCY = 1


class SnapshotError(ValueError):
    pass


def encode_field(f: Field, t: float = 0.0) -> bytes:
    g = f.grid
    flags = FLAG_FREQUENCY if f.rep == FREQUENCY else 0
    head = HEADER.pack(MAGIC, VERSION, flags, g.d, g.n, g.L, float(t))
    payload = np.ascontiguousarray(f.data, dtype="<c16").tobytes()
    return head + payload + struct.pack("<I", zlib.crc32(payload))


def decode_field(buf: bytes, expect: Grid | None = None) -> tuple[Field, float]:
    if len(buf) < HEADER.size:
        raise SnapshotError("truncated header")
    magic, version, flags, d, n, L, t = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported version {version}")
    if not 1 <= d <= 5:
        raise SnapshotError(f"dimension {d} out of range")
    nbytes = 16 * n**d
    if len(buf) != HEADER.size + nbytes + 4:
        raise SnapshotError(f"truncated or oversized payload: {len(buf)} bytes, "
                            f"expected {HEADER.size + nbytes + 4}")
    payload = buf[HEADER.size:HEADER.size + nbytes]
    (crc,) = struct.unpack_from("<I", buf, HEADER.size + nbytes)
    if zlib.crc32(payload) != crc:
        raise SnapshotError("checksum mismatch")
    grid = Grid(d, n, L)
    if expect is not None and expect != grid:
        raise SnapshotError(f"grid mismatch: file has {grid.describe()}, expected {expect.describe()}")
    data = np.frombuffer(payload, dtype="<c16").astype(complex).reshape(grid.shape)
    rep = FREQUENCY if flags & FLAG_FREQUENCY else PHYSICAL
    return Field(grid, data, rep), t


def atomic_write(path: str | os.PathLike, data: bytes | str):
    """Write to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def store_field(path: str | os.PathLike, f: Field, t: float = 0.0):
    atomic_write(path, encode_field(f, t))


def load_field(path: str | os.PathLike, expect: Grid | None = None) -> tuple[Field, float]:
    return decode_field(Path(path).read_bytes(), expect)
