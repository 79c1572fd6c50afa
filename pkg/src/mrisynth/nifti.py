"""Minimal NIfTI-1 reader/writer.

Single-file NIfTI-1 only (``.nii`` / ``.nii.gz``).  On read we honor
dim[1..3], datatype, bitpix, pixdim[1..3], vox_offset, scl_slope/scl_inter
(applied to the data) and the sform/qform affines, preferring the sform
whenever sform_code > 0.  Written files are always little-endian with the
sform set, scl_slope=1 and scl_inter=0.

Data arrays are returned in Fortran voxel order, i.e. ``data[i, j, k]``
is the voxel whose world position is ``affine @ [i, j, k, 1]``.
"""

from __future__ import annotations

import gzip
from pathlib import Path

import numpy as np

from .errors import FormatError, UnsupportedError

HEADER_SIZE = 348
VOX_OFFSET = 352  # header + 4 empty extension bytes

_HEADER_FIELDS = [
    ("sizeof_hdr", "i4"),
    ("data_type", "S10"),
    ("db_name", "S18"),
    ("extents", "i4"),
    ("session_error", "i2"),
    ("regular", "S1"),
    ("dim_info", "u1"),
    ("dim", "i2", (8,)),
    ("intent_p1", "f4"),
    ("intent_p2", "f4"),
    ("intent_p3", "f4"),
    ("intent_code", "i2"),
    ("datatype", "i2"),
    ("bitpix", "i2"),
    ("slice_start", "i2"),
    ("pixdim", "f4", (8,)),
    ("vox_offset", "f4"),
    ("scl_slope", "f4"),
    ("scl_inter", "f4"),
    ("slice_end", "i2"),
    ("slice_code", "u1"),
    ("xyzt_units", "u1"),
    ("cal_max", "f4"),
    ("cal_min", "f4"),
    ("slice_duration", "f4"),
    ("toffset", "f4"),
    ("glmax", "i4"),
    ("glmin", "i4"),
    ("descrip", "S80"),
    ("aux_file", "S24"),
    ("qform_code", "i2"),
    ("sform_code", "i2"),
    ("quatern_b", "f4"),
    ("quatern_c", "f4"),
    ("quatern_d", "f4"),
    ("qoffset_x", "f4"),
    ("qoffset_y", "f4"),
    ("qoffset_z", "f4"),
    ("srow_x", "f4", (4,)),
    ("srow_y", "f4", (4,)),
    ("srow_z", "f4", (4,)),
    ("intent_name", "S16"),
    ("magic", "S4"),
]

# NIfTI-1 datatype codes we can decode.  Anything else (complex, RGB,
# binary, 128-bit floats) raises UnsupportedError.
_DTYPE_FROM_CODE = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}

_CODE_FROM_DTYPE = {
    np.dtype(np.float32): (16, 32),
    np.dtype(np.uint16): (512, 16),
}


def _header_dtype(byteorder: str) -> np.dtype:
    dt = np.dtype([(name, byteorder + spec, *shape) for name, spec, *shape in _HEADER_FIELDS])
    assert dt.itemsize == HEADER_SIZE
    return dt


def _open(path, mode: str):
    path = Path(path)
    if path.name.endswith(".nii.gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def _quaternion_affine(hdr) -> np.ndarray:
    """Affine from the qform quaternion (NIfTI-1 'method 2')."""
    b = float(hdr["quatern_b"])
    c = float(hdr["quatern_c"])
    d = float(hdr["quatern_d"])
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(a2) if a2 > 1e-7 else 0.0
    rot = np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
    ])
    pixdim = np.asarray(hdr["pixdim"], dtype=np.float64)
    qfac = -1.0 if pixdim[0] < 0 else 1.0
    scale = np.array([pixdim[1], pixdim[2], qfac * pixdim[3]])
    affine = np.eye(4)
    affine[:3, :3] = rot * scale
    affine[:3, 3] = [hdr["qoffset_x"], hdr["qoffset_y"], hdr["qoffset_z"]]
    return affine


def read_nifti(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a NIfTI-1 file.

    Returns (data, spacing, affine) where data has shape dim[1..3] in
    Fortran voxel order, spacing is pixdim[1..3] (or affine column norms
    when an sform/qform is present) and affine is the preferred 4x4
    voxel-to-world matrix.
    """
    try:
        with _open(path, "rb") as f:
            raw = f.read()
    except (OSError, gzip.BadGzipFile) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"{path}: file shorter than a NIfTI-1 header")

    hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=_header_dtype("<"))[0]
    if int(hdr["sizeof_hdr"]) != HEADER_SIZE:
        hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=_header_dtype(">"))[0]
        if int(hdr["sizeof_hdr"]) != HEADER_SIZE:
            raise FormatError(f"{path}: not a NIfTI-1 file (bad sizeof_hdr)")
    byteorder = "<" if hdr.dtype.fields["sizeof_hdr"][0].byteorder in "<=|" else ">"

    magic = bytes(hdr["magic"]).rstrip(b"\x00")
    if magic == b"ni1":
        raise UnsupportedError(f"{path}: two-file (.hdr/.img) NIfTI is not supported")
    if magic != b"n+1":
        raise FormatError(f"{path}: bad magic {magic!r}")

    dim = np.asarray(hdr["dim"], dtype=np.int64)
    ndim = int(dim[0])
    if ndim < 1 or ndim > 7:
        raise FormatError(f"{path}: invalid dim[0]={ndim}")
    if ndim > 3 and any(dim[4:ndim + 1] > 1):
        raise UnsupportedError(f"{path}: only 3D volumes are supported, got dim={dim[:ndim + 1]}")
    dims = tuple(int(d) for d in dim[1:4])
    if ndim < 3:
        dims = dims[:ndim] + (1,) * (3 - ndim)
    if any(d < 1 for d in dims):
        raise FormatError(f"{path}: non-positive dims {dims}")

    code = int(hdr["datatype"])
    if code not in _DTYPE_FROM_CODE:
        raise UnsupportedError(f"{path}: unsupported NIfTI datatype code {code}")
    dtype = np.dtype(_DTYPE_FROM_CODE[code]).newbyteorder(byteorder)

    n_vox = int(np.prod(dims))
    offset = int(hdr["vox_offset"])
    if offset < HEADER_SIZE:
        offset = VOX_OFFSET
    nbytes = n_vox * dtype.itemsize
    if len(raw) < offset + nbytes:
        raise FormatError(f"{path}: truncated data section")
    data = np.frombuffer(raw[offset:offset + nbytes], dtype=dtype).reshape(dims, order="F")

    slope = float(hdr["scl_slope"])
    inter = float(hdr["scl_inter"])
    if not np.isfinite(slope) or slope == 0.0:
        slope, inter = 1.0, 0.0
    if not np.isfinite(inter):
        inter = 0.0
    if slope != 1.0 or inter != 0.0:
        data = data.astype(np.float64) * slope + inter

    pixdim = np.abs(np.asarray(hdr["pixdim"], dtype=np.float64)[1:4])
    if int(hdr["sform_code"]) > 0:
        affine = np.eye(4)
        affine[0] = np.asarray(hdr["srow_x"], dtype=np.float64)
        affine[1] = np.asarray(hdr["srow_y"], dtype=np.float64)
        affine[2] = np.asarray(hdr["srow_z"], dtype=np.float64)
        spacing = np.linalg.norm(affine[:3, :3], axis=0)
    elif int(hdr["qform_code"]) > 0:
        affine = _quaternion_affine(hdr)
        spacing = np.linalg.norm(affine[:3, :3], axis=0)
    else:
        spacing = np.where(pixdim > 0, pixdim, 1.0)
        affine = np.diag([*spacing, 1.0])
    if np.any(spacing <= 0):
        raise FormatError(f"{path}: degenerate affine (zero-length column)")
    return np.ascontiguousarray(data), spacing, affine


def write_nifti(path, data: np.ndarray, spacing, affine: np.ndarray) -> None:
    """Write a 3D array as a single-file NIfTI-1 volume.

    dtype must be float32 (intensity) or uint16 (labels).  The affine is
    stored as the sform (code 1); pixdim mirrors `spacing`.
    """
    data = np.asarray(data)
    if data.ndim != 3:
        raise UnsupportedError(f"expected a 3D array, got {data.ndim}D")
    try:
        code, bitpix = _CODE_FROM_DTYPE[data.dtype]
    except KeyError:
        raise UnsupportedError(f"refusing to write dtype {data.dtype}; use float32 or uint16")

    hdr = np.zeros((), dtype=_header_dtype("<"))
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["regular"] = b"r"
    hdr["dim"] = [3, *data.shape, 1, 1, 1, 1]
    hdr["datatype"] = code
    hdr["bitpix"] = bitpix
    hdr["pixdim"] = [1.0, *np.asarray(spacing, dtype=np.float64), 0, 0, 0, 0]
    hdr["vox_offset"] = VOX_OFFSET
    hdr["scl_slope"] = 1.0
    hdr["scl_inter"] = 0.0
    hdr["xyzt_units"] = 2  # NIFTI_UNITS_MM
    hdr["descrip"] = b"mrisynth"
    hdr["qform_code"] = 0
    hdr["sform_code"] = 1
    affine = np.asarray(affine, dtype=np.float64)
    hdr["srow_x"] = affine[0]
    hdr["srow_y"] = affine[1]
    hdr["srow_z"] = affine[2]
    hdr["magic"] = b"n+1"

    payload = hdr.tobytes() + b"\x00\x00\x00\x00" + np.asfortranarray(data).tobytes(order="F")
    path = Path(path)
    if path.name.endswith(".nii.gz"):
        # mtime pinned to 0: identical volumes must give identical bytes
        # (reproducibility is checked bitwise across runs and workers).
        path.write_bytes(gzip.compress(payload, mtime=0))
    else:
        path.write_bytes(payload)
