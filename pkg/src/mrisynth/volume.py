"""Core 3D volume types and grid-level primitives.

A volume is an immutable (grid metadata, data array) pair.  Arrays are
indexed ``data[i, j, k]`` and the affine maps voxel indices to world
millimetres.  All operations are pure functions returning new volumes,
so they are safe to call from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import nifti
from .errors import DataDomainError, UsageError

LABEL_DTYPE = np.uint16
INTENSITY_DTYPE = np.float32


def _triple(value, name: str, dtype=float) -> tuple:
    t = tuple(dtype(v) for v in value)
    if len(t) != 3:
        raise UsageError(f"{name} must have 3 components, got {len(t)}")
    return t


@dataclass(frozen=True)
class GridMeta:
    """Sampling grid: voxel counts, spacing (mm) and voxel-to-world affine."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    affine: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dims", _triple(self.dims, "dims", int))
        object.__setattr__(self, "spacing", _triple(self.spacing, "spacing"))
        affine = np.array(self.affine, dtype=np.float64)
        affine.flags.writeable = False
        object.__setattr__(self, "affine", affine)
        if any(d < 1 for d in self.dims):
            raise UsageError(f"dims must be >= 1, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise UsageError(f"spacing must be > 0, got {self.spacing}")
        if affine.shape != (4, 4):
            raise UsageError(f"affine must be 4x4, got {affine.shape}")
        if abs(np.linalg.det(affine[:3, :3])) <= 0:
            raise UsageError("affine is singular")
        norms = np.linalg.norm(affine[:3, :3], axis=0)
        if not np.allclose(norms, self.spacing, rtol=1e-4, atol=0):
            raise UsageError(
                f"affine column norms {norms} inconsistent with spacing {self.spacing}")

    @classmethod
    def axis_aligned(cls, dims, spacing, origin=(0.0, 0.0, 0.0)) -> "GridMeta":
        """Grid with axes parallel to world axes and voxel (0,0,0) at `origin`."""
        spacing = _triple(spacing, "spacing")
        affine = np.diag([*spacing, 1.0])
        affine[:3, 3] = origin
        return cls(tuple(dims), spacing, affine)

    def voxel_to_world(self, voxels: np.ndarray) -> np.ndarray:
        """Map (..., 3) voxel coordinates to world mm."""
        voxels = np.asarray(voxels, dtype=np.float64)
        return voxels @ self.affine[:3, :3].T + self.affine[:3, 3]

    def world_to_voxel(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        inv = np.linalg.inv(self.affine)
        return points @ inv[:3, :3].T + inv[:3, 3]

    def center_world(self) -> np.ndarray:
        """World position of the grid's geometric center."""
        center_vox = (np.asarray(self.dims, dtype=np.float64) - 1.0) / 2.0
        return self.voxel_to_world(center_vox)

    def approx_equal(self, other: "GridMeta", tol: float = 1e-5) -> bool:
        return (self.dims == other.dims
                and np.allclose(self.spacing, other.spacing, atol=tol)
                and np.allclose(self.affine, other.affine, atol=1e-3))

    def same_grid(self, other: "GridMeta") -> bool:
        """True when the grids are indistinguishable (sub-nanometre tolerance)."""
        return (self.dims == other.dims
                and np.allclose(self.spacing, other.spacing, atol=1e-9, rtol=0)
                and np.allclose(self.affine, other.affine, atol=1e-9, rtol=0))


def _freeze(data: np.ndarray) -> np.ndarray:
    data = np.ascontiguousarray(data)
    data.flags.writeable = False
    return data


@dataclass(frozen=True)
class LabelVolume:
    """Integer label map; label 0 is reserved for background."""

    meta: GridMeta
    data: np.ndarray
    label_set: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.shape != self.meta.dims:
            raise UsageError(f"data shape {data.shape} != dims {self.meta.dims}")
        if not np.issubdtype(data.dtype, np.integer):
            raise DataDomainError(f"label data must be integer, got {data.dtype}")
        if data.size and int(data.min()) < 0:
            raise DataDomainError("label data must be non-negative")
        if data.dtype != LABEL_DTYPE:
            if data.size and int(data.max()) > np.iinfo(LABEL_DTYPE).max:
                raise DataDomainError(
                    f"label value {int(data.max())} exceeds {LABEL_DTYPE} range")
            data = data.astype(LABEL_DTYPE)
        object.__setattr__(self, "data", _freeze(data))
        labels = tuple(int(v) for v in np.unique(self.data))
        object.__setattr__(self, "label_set", labels)

    def with_data(self, data: np.ndarray) -> "LabelVolume":
        return LabelVolume(self.meta, data)

    def count(self, label: int) -> int:
        return int(np.count_nonzero(self.data == label))


@dataclass(frozen=True)
class IntensityVolume:
    """Real-valued volume; data is float32 and always finite."""

    meta: GridMeta
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.shape != self.meta.dims:
            raise UsageError(f"data shape {data.shape} != dims {self.meta.dims}")
        data = data.astype(INTENSITY_DTYPE, copy=False)
        if not np.all(np.isfinite(data)):
            raise DataDomainError("intensity data contains NaN/Inf")
        object.__setattr__(self, "data", _freeze(data))

    def with_data(self, data: np.ndarray) -> "IntensityVolume":
        return IntensityVolume(self.meta, data)


Volume = LabelVolume | IntensityVolume


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def load_volume(path, kind: str) -> Volume:
    """Load a NIfTI-1 file as a label or intensity volume.

    kind='label' requires every voxel to be a non-negative integer within
    1e-6 after any scl_slope/scl_inter scaling.
    """
    if kind not in ("label", "intensity"):
        raise UsageError(f"kind must be 'label' or 'intensity', got {kind!r}")
    data, spacing, affine = nifti.read_nifti(path)
    meta = GridMeta(data.shape, tuple(spacing), affine)
    if kind == "intensity":
        arr = data.astype(INTENSITY_DTYPE)
        if not np.all(np.isfinite(arr)):
            raise DataDomainError(f"{path}: intensity data contains NaN/Inf")
        return IntensityVolume(meta, arr)
    rounded = np.rint(data)
    if not np.allclose(data, rounded, atol=1e-6, rtol=0):
        bad = float(np.asarray(data).ravel()[np.argmax(np.abs(data - rounded).ravel())])
        raise DataDomainError(f"{path}: non-integer value {bad} in label volume")
    if rounded.size and rounded.min() < 0:
        raise DataDomainError(f"{path}: negative label value")
    return LabelVolume(meta, rounded.astype(np.int64))


def save_volume(v: Volume, path) -> None:
    """Write a volume as single-file NIfTI-1 (float32 or uint16)."""
    path = Path(path)
    if not (path.name.endswith(".nii") or path.name.endswith(".nii.gz")):
        raise UsageError(f"unsupported extension for {path.name}; use .nii or .nii.gz")
    nifti.write_nifti(path, v.data, v.meta.spacing, v.meta.affine)


# ---------------------------------------------------------------------------
# Grid primitives
# ---------------------------------------------------------------------------

def _split_offsets(diff: int) -> tuple[int, int]:
    # Even split; the extra voxel always goes to the high-index side.
    low = diff // 2
    return low, diff - low


def crop_or_pad(v: Volume, target_dims, fill=0) -> Volume:
    """Center-crop/pad each axis to `target_dims`, padding with `fill`.

    The affine is shifted so surviving voxels keep their world position.
    """
    target_dims = _triple(target_dims, "target_dims", int)
    if any(d < 1 for d in target_dims):
        raise UsageError(f"target_dims must be >= 1, got {target_dims}")
    if isinstance(v, LabelVolume) and int(fill) != fill:
        raise UsageError(f"label fill must be an integer, got {fill}")
    src = v.data
    out = np.full(target_dims, fill, dtype=src.dtype)
    src_slices, dst_slices = [], []
    start_vox = []
    for axis in range(3):
        d, t = v.meta.dims[axis], target_dims[axis]
        if t <= d:
            lo, _ = _split_offsets(d - t)
            src_slices.append(slice(lo, lo + t))
            dst_slices.append(slice(0, t))
            start_vox.append(lo)
        else:
            lo, _ = _split_offsets(t - d)
            src_slices.append(slice(0, d))
            dst_slices.append(slice(lo, lo + d))
            start_vox.append(-lo)
    out[tuple(dst_slices)] = src[tuple(src_slices)]
    affine = np.array(v.meta.affine)
    affine[:3, 3] += affine[:3, :3] @ np.asarray(start_vox, dtype=np.float64)
    meta = GridMeta(target_dims, v.meta.spacing, affine)
    if isinstance(v, LabelVolume):
        return LabelVolume(meta, out)
    return IntensityVolume(meta, out)


def rescale_01(v: IntensityVolume) -> IntensityVolume:
    """Affinely map intensities to [0, 1]; constant input maps to all zeros."""
    data = v.data.astype(np.float64)
    lo, hi = float(data.min()), float(data.max())
    if hi == lo:
        return v.with_data(np.zeros(v.meta.dims, dtype=INTENSITY_DTYPE))
    return v.with_data((data - lo) / (hi - lo))


def _sample_at_voxels(data: np.ndarray, coords: np.ndarray, interp: str) -> np.ndarray:
    """Pull-sample `data` at fractional voxel coordinates (3, ...).

    Out-of-bounds: clamp-to-edge for trilinear, constant 0 for nearest
    (matching background-padding semantics).
    """
    if interp == "nearest":
        return ndimage.map_coordinates(data, coords, order=0, mode="constant", cval=0)
    return ndimage.map_coordinates(data, coords, order=1, mode="nearest")


def resample_to_grid(v: Volume, target: GridMeta, interp: str) -> Volume:
    """Resample onto an explicit target grid (world-space alignment)."""
    if interp not in ("nearest", "trilinear"):
        raise UsageError(f"interp must be 'nearest' or 'trilinear', got {interp!r}")
    if isinstance(v, LabelVolume) and interp != "nearest":
        raise UsageError("label volumes must use nearest-neighbor resampling")
    if target.same_grid(v.meta):
        data = v.data
    else:
        # voxel(out) -> world -> voxel(in), as one combined affine
        combined = np.linalg.inv(v.meta.affine) @ target.affine
        grid = np.indices(target.dims, dtype=np.float64)
        coords = np.tensordot(combined[:3, :3], grid, axes=1)
        coords += combined[:3, 3].reshape(3, 1, 1, 1)
        data = _sample_at_voxels(v.data, coords, interp)
    if isinstance(v, LabelVolume):
        return LabelVolume(target, data)
    return IntensityVolume(target, data)


def resample(v: Volume, target_spacing, interp: str) -> Volume:
    """Resample to new spacing with dims = round(dims * spacing / target).

    The output grid keeps the input's axis directions and the world
    position of voxel (0, 0, 0), so the two grids stay aligned.
    """
    target_spacing = _triple(target_spacing, "target_spacing")
    if any(s <= 0 for s in target_spacing):
        raise UsageError(f"target_spacing must be > 0, got {target_spacing}")
    out_dims = tuple(
        max(1, int(np.floor(d * s / t + 0.5)))
        for d, s, t in zip(v.meta.dims, v.meta.spacing, target_spacing))
    directions = v.meta.affine[:3, :3] / np.asarray(v.meta.spacing)
    affine = np.eye(4)
    affine[:3, :3] = directions * np.asarray(target_spacing)
    affine[:3, 3] = v.meta.affine[:3, 3]
    return resample_to_grid(v, GridMeta(out_dims, target_spacing, affine), interp)
