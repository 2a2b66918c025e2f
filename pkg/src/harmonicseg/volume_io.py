"""Minimal binary volume format.

Layout: 4-byte magic ``SHV1``, one dtype byte (0 = uint8 mask, 1 = uint16
labels, 2 = float32), three little-endian uint32 extents (x, y, z), then
the payload in x-fastest order.  Round-trips are byte-exact.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import VolumeFormatError

MAGIC = b"SHV1"
HEADER_SIZE = 17

_DTYPE_BY_CODE = {0: np.dtype("u1"), 1: np.dtype("<u2"), 2: np.dtype("<f4")}
_CODE_BY_KIND = {np.dtype("u1"): 0, np.dtype("<u2"): 1, np.dtype("<f4"): 2}


def read_volume(path):
    """Read a volume file; returns an ``(x, y, z)`` array."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise VolumeFormatError("truncated header", offset=len(data))
    if data[:4] != MAGIC:
        raise VolumeFormatError(f"bad magic {data[:4]!r}", offset=0)
    code = data[4]
    if code not in _DTYPE_BY_CODE:
        raise VolumeFormatError(f"unknown dtype code {code}", offset=4)
    dims = struct.unpack("<3I", data[5:HEADER_SIZE])
    dtype = _DTYPE_BY_CODE[code]
    expected = dims[0] * dims[1] * dims[2] * dtype.itemsize
    if len(data) - HEADER_SIZE != expected:
        raise VolumeFormatError(
            f"payload length {len(data) - HEADER_SIZE} does not match dims "
            f"{dims} ({expected} bytes expected)",
            offset=HEADER_SIZE,
        )
    flat = np.frombuffer(data, dtype=dtype, offset=HEADER_SIZE)
    return flat.reshape(dims, order="F").copy(order="F")


def write_volume(volume, path):
    """Write an ``(x, y, z)`` array; bool data is stored as a uint8 mask."""
    volume = np.asarray(volume)
    if volume.ndim != 3:
        raise ValueError("volume must be 3-d")
    if volume.dtype == bool:
        volume = volume.astype(np.uint8)
    dtype = volume.dtype.newbyteorder("<")
    if dtype not in _CODE_BY_KIND:
        raise ValueError(
            f"unsupported dtype {volume.dtype}; use uint8, uint16 or float32"
        )
    header = MAGIC + bytes([_CODE_BY_KIND[dtype]]) + struct.pack(
        "<3I", *volume.shape
    )
    payload = np.ascontiguousarray(volume.astype(dtype, copy=False)
                                   .ravel(order="F")).tobytes()
    Path(path).write_bytes(header + payload)
