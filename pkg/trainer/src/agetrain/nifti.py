"""Minimal NIfTI-1 reader.

The trainer consumes volumes produced by the generator as plain files; this
reader covers exactly what arrives on that path: single-file little-endian
NIfTI-1 (`.nii` or `.nii.gz`), 3-D, with the common scalar datatypes and
scl slope/inter scaling. Everything else is rejected loudly.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}

_HEADER_SIZE = 348


def read_volume(path) -> np.ndarray:
    """Load a 3-D NIfTI-1 volume as a float32 array in voxel index order."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    if len(raw) < _HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    (sizeof_hdr,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr != _HEADER_SIZE:
        raise FormatError(f"{path}: not little-endian NIfTI-1 "
                          f"(sizeof_hdr {sizeof_hdr})")
    magic = raw[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise FormatError(f"{path}: bad magic {magic!r}")
    dim = struct.unpack_from("<8h", raw, 40)
    if dim[0] != 3:
        raise FormatError(f"{path}: expected a 3-D volume, got dim[0]={dim[0]}")
    dims = tuple(int(d) for d in dim[1:4])
    if any(d < 1 for d in dims):
        raise FormatError(f"{path}: non-positive dims {dims}")
    (datatype,) = struct.unpack_from("<h", raw, 70)
    if datatype not in _DTYPES:
        raise FormatError(f"{path}: unsupported datatype code {datatype}")
    dtype = np.dtype(_DTYPES[datatype]).newbyteorder("<")
    (vox_offset,) = struct.unpack_from("<f", raw, 108)
    offset = int(vox_offset) if magic == b"n+1\x00" else _HEADER_SIZE + 4
    slope, inter = struct.unpack_from("<2f", raw, 112)

    count = dims[0] * dims[1] * dims[2]
    end = offset + count * dtype.itemsize
    if end > len(raw):
        raise FormatError(f"{path}: data truncated ({len(raw)} < {end} bytes)")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    data = data.reshape(dims, order="F").astype(np.float32)
    if slope not in (0.0, 1.0) or inter != 0.0:
        scale = slope if slope != 0.0 else 1.0
        data = data * np.float32(scale) + np.float32(inter)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite voxel values")
    return np.ascontiguousarray(data)
