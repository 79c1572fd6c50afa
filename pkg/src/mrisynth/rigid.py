"""Random rigid transforms (rotation + translation) applied to label maps.

The transform deliberately has no scale, shear or elastic component, so
it can never mimic the atrophy patterns the downstream age regressor is
supposed to learn from.  Rotation is intrinsic about x, then y, then z,
pivoting on the volume's world-space center by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import UsageError
from .volume import LabelVolume


def _rotation_matrix(rotation_deg) -> np.ndarray:
    rx, ry, rz = np.deg2rad(np.asarray(rotation_deg, dtype=np.float64))
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return mx @ my @ mz


def _euler_from_matrix(rot: np.ndarray) -> tuple[float, float, float]:
    """Inverse of _rotation_matrix (x-y-z intrinsic convention)."""
    sy = np.clip(rot[0, 2], -1.0, 1.0)
    ry = np.arcsin(sy)
    if abs(abs(sy) - 1.0) > 1e-9:
        rx = np.arctan2(-rot[1, 2], rot[2, 2])
        rz = np.arctan2(-rot[0, 1], rot[0, 0])
    else:
        # gimbal lock: fold z into x
        rx = np.arctan2(rot[2, 1], rot[1, 1])
        rz = 0.0
    return tuple(np.rad2deg([rx, ry, rz]))


@dataclass(frozen=True)
class RigidTransform3D:
    """World-space map w -> R (w - center) + center + translation."""

    rotation_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    translation_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    center_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "rotation_deg", tuple(float(v) for v in self.rotation_deg))
        object.__setattr__(self, "translation_mm", tuple(float(v) for v in self.translation_mm))
        object.__setattr__(self, "center_mm", tuple(float(v) for v in self.center_mm))

    @property
    def rotation_matrix(self) -> np.ndarray:
        return _rotation_matrix(self.rotation_deg)

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        """Apply the transform to world points of shape (..., 3)."""
        points = np.asarray(points, dtype=np.float64)
        center = np.asarray(self.center_mm)
        return (points - center) @ self.rotation_matrix.T + center + self.translation_mm

    def with_center(self, center_mm) -> "RigidTransform3D":
        """Re-express the same world map about a different pivot."""
        rot = self.rotation_matrix
        center = np.asarray(center_mm, dtype=np.float64)
        # solve R (w - c') + c' + t' = R (w - c) + c + t for t'
        old = np.asarray(self.center_mm)
        shift = rot @ (center - old) - (center - old)
        return RigidTransform3D(self.rotation_deg,
                                tuple(np.asarray(self.translation_mm) + shift),
                                tuple(center))


IDENTITY = RigidTransform3D()


@dataclass(frozen=True)
class RigidSamplingConfig:
    """Uniform sampling ranges: rotation in +-rot_range_deg per axis,
    translation in +-trans_range_mm per axis."""

    rot_range_deg: float = 15.0
    trans_range_mm: float = 10.0

    def __post_init__(self):
        if self.rot_range_deg < 0 or self.trans_range_mm < 0:
            raise UsageError("sampling ranges must be >= 0")


def sample_rigid(cfg: RigidSamplingConfig, rng: np.random.Generator,
                 center_mm=(0.0, 0.0, 0.0)) -> RigidTransform3D:
    """Draw rotation angles then translations, each U[-range, +range]."""
    rot = rng.uniform(-cfg.rot_range_deg, cfg.rot_range_deg, size=3)
    trans = rng.uniform(-cfg.trans_range_mm, cfg.trans_range_mm, size=3)
    return RigidTransform3D(tuple(rot), tuple(trans), tuple(float(c) for c in center_mm))


def compose(a: RigidTransform3D, b: RigidTransform3D) -> RigidTransform3D:
    """Transform equivalent to applying b first, then a."""
    ra, rb = a.rotation_matrix, b.rotation_matrix
    rot = ra @ rb
    # composed map: w -> rot @ w + d
    d = a.apply_points(b.apply_points(np.zeros(3)))
    center = np.asarray(a.center_mm)
    trans = d + rot @ center - center
    return RigidTransform3D(_euler_from_matrix(rot), tuple(trans), a.center_mm)


def invert(t: RigidTransform3D) -> RigidTransform3D:
    rot_inv = t.rotation_matrix.T
    trans = -(rot_inv @ np.asarray(t.translation_mm))
    return RigidTransform3D(_euler_from_matrix(rot_inv), tuple(trans), t.center_mm)


def apply_rigid_labels(s: LabelVolume, t: RigidTransform3D) -> LabelVolume:
    """Deform a label map on its own grid, pull-based with nearest labels.

    Each output voxel takes the label of the nearest input voxel under the
    inverse world map; voxels pulled from outside the field of view become
    background 0.
    """
    if t.rotation_deg == (0.0, 0.0, 0.0) and t.translation_mm == (0.0, 0.0, 0.0):
        return s
    inv = invert(t)
    meta = s.meta
    grid = np.indices(meta.dims, dtype=np.float64)
    world = np.tensordot(meta.affine[:3, :3], grid, axes=1)
    world += meta.affine[:3, 3].reshape(3, 1, 1, 1)
    rot = inv.rotation_matrix
    center = np.asarray(inv.center_mm).reshape(3, 1, 1, 1)
    src_world = np.tensordot(rot, world - center, axes=1)
    src_world += center + np.asarray(inv.translation_mm).reshape(3, 1, 1, 1)
    affine_inv = np.linalg.inv(meta.affine)
    coords = np.tensordot(affine_inv[:3, :3], src_world, axes=1)
    coords += affine_inv[:3, 3].reshape(3, 1, 1, 1)
    # grid-constant puts the inside/outside cutoff half a voxel beyond the
    # edge voxels, so a source that rounds to an existing voxel is never
    # dropped by sub-ulp coordinate noise.
    data = ndimage.map_coordinates(s.data, coords, order=0, mode="grid-constant",
                                   cval=0)
    return LabelVolume(meta, data)
