"""Acquisition-artifact simulation.

Three independent corruptions, each gated by an `enabled` flag that the
pipeline honors: a smooth multiplicative bias field, a gamma contrast
transform with log-normally sampled exponent, and a lower-resolution
simulation (blur, downsample, resample back to the native grid).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import UsageError
from .volume import GridMeta, IntensityVolume, _triple, resample, resample_to_grid

# Slice-profile matching: blur std in voxels per unit of spacing ratio.
BLUR_VOXELS_PER_RATIO = 0.42
_RATIO_TOL = 1e-6


@dataclass(frozen=True)
class BiasFieldConfig:
    control_grid: tuple[int, int, int] = (4, 4, 4)
    amplitude: float = 0.3
    enabled: bool = True

    def __post_init__(self):
        grid = _triple(self.control_grid, "control_grid", dtype=int)
        object.__setattr__(self, "control_grid", grid)
        if not all(2 <= n <= 8 for n in grid):
            raise UsageError(f"control_grid must be in [2, 8] per axis, got {grid}")
        if self.amplitude < 0:
            raise UsageError(f"amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class GammaConfig:
    log_gamma_std: float = 0.3
    enabled: bool = True

    def __post_init__(self):
        if self.log_gamma_std < 0:
            raise UsageError(f"log_gamma_std must be >= 0, got {self.log_gamma_std}")


@dataclass(frozen=True)
class ResolutionConfig:
    iso_spacing_range_mm: tuple[float, float] = (1.0, 3.0)
    aniso_axis_spacing_range_mm: tuple[float, float] = (1.0, 6.0)
    p_anisotropic: float = 0.5
    enabled: bool = True

    def __post_init__(self):
        for name in ("iso_spacing_range_mm", "aniso_axis_spacing_range_mm"):
            lo, hi = (float(v) for v in getattr(self, name))
            object.__setattr__(self, name, (lo, hi))
            if not 0 < lo <= hi:
                raise UsageError(f"{name} needs 0 < lo <= hi, got ({lo}, {hi})")
        if not 0 <= self.p_anisotropic <= 1:
            raise UsageError(f"p_anisotropic must be in [0, 1], got {self.p_anisotropic}")


# ---------------------------------------------------------------------------
# Bias field
# ---------------------------------------------------------------------------

def sample_bias_field(target, cfg: BiasFieldConfig, rng: np.random.Generator) -> IntensityVolume:
    """Exponentiated trilinear upsampling of a coarse N(0, amplitude) grid.

    `target` is a GridMeta (the field lands on that grid) or a plain dims
    triple (unit spacing assumed).  Control points sit corner-aligned, so
    a voxel coinciding with one takes exactly exp(control value).
    """
    if isinstance(target, GridMeta):
        meta = target
    else:
        meta = GridMeta.axis_aligned(target, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0))
    control = rng.normal(0.0, cfg.amplitude, size=cfg.control_grid)
    coords = np.indices(meta.dims, dtype=np.float64)
    for axis in range(3):
        d, nc = meta.dims[axis], cfg.control_grid[axis]
        scale = (nc - 1) / (d - 1) if d > 1 else 0.0
        coords[axis] *= scale
    log_field = ndimage.map_coordinates(control, coords, order=1, mode="nearest")
    return IntensityVolume(meta, np.exp(log_field))


def apply_bias(x: IntensityVolume, field: IntensityVolume) -> IntensityVolume:
    """Voxelwise product x * field."""
    if not x.meta.same_grid(field.meta):
        raise UsageError("bias field grid does not match the image grid")
    return IntensityVolume(x.meta, x.data.astype(np.float64) * field.data)


# ---------------------------------------------------------------------------
# Gamma transform
# ---------------------------------------------------------------------------

def sample_gamma(cfg: GammaConfig, rng: np.random.Generator) -> float:
    """gamma = exp(eps), eps ~ N(0, log_gamma_std); gamma and 1/gamma equally likely."""
    return float(np.exp(rng.normal(0.0, cfg.log_gamma_std)))


def gamma_transform(x: IntensityVolume, gamma: float) -> IntensityVolume:
    """Voxelwise x**gamma on [0,1] data; fixes 0 and 1, preserves order."""
    if not gamma > 0:
        raise UsageError(f"gamma must be > 0, got {gamma}")
    data = x.data.astype(np.float64)
    lo, hi = float(data.min()), float(data.max())
    if lo < -1e-6 or hi > 1 + 1e-6:
        raise UsageError(f"input must lie in [0, 1], got range [{lo}, {hi}]")
    return IntensityVolume(x.meta, np.clip(data, 0.0, 1.0) ** gamma)


# ---------------------------------------------------------------------------
# Resolution simulation
# ---------------------------------------------------------------------------

def sample_resolution(cfg: ResolutionConfig, native_spacing, rng: np.random.Generator) -> tuple:
    """Random target spacing: isotropic U[iso range] on all axes, or, with
    probability p_anisotropic, U[aniso range] on one random axis with the
    other axes kept at native spacing."""
    native = _triple(native_spacing, "native_spacing")
    if rng.random() < cfg.p_anisotropic:
        axis = int(rng.integers(3))
        lo, hi = cfg.aniso_axis_spacing_range_mm
        value = float(rng.uniform(lo, hi))
        return tuple(value if i == axis else native[i] for i in range(3))
    lo, hi = cfg.iso_spacing_range_mm
    value = float(rng.uniform(lo, hi))
    return (value, value, value)


def simulate_resolution(x: IntensityVolume, target_spacing_mm) -> IntensityVolume:
    """Simulate acquisition at a coarser spacing, back on the native grid.

    Per axis with ratio r = target/native > 1: Gaussian blur with
    sigma = 0.42 * r voxels, then trilinear resampling to the target
    spacing and back.  Axes at ratio 1 are untouched.
    """
    native = x.meta.spacing
    target = _triple(target_spacing_mm, "target_spacing_mm")
    ratios = tuple(t / n for t, n in zip(target, native))
    if any(r < 1 - _RATIO_TOL for r in ratios):
        raise UsageError(
            f"target spacing {target} is finer than native {native}; "
            "this op only lowers resolution")
    if all(r <= 1 + _RATIO_TOL for r in ratios):
        return x
    data = x.data.astype(np.float64)
    for axis, r in enumerate(ratios):
        if r > 1 + _RATIO_TOL:
            data = ndimage.gaussian_filter1d(
                data, sigma=BLUR_VOXELS_PER_RATIO * r, axis=axis, mode="nearest")
    low = resample(IntensityVolume(x.meta, data), target, "trilinear")
    return resample_to_grid(low, x.meta, "trilinear")
