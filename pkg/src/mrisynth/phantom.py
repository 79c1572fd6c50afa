"""Procedural aging phantoms: label maps whose geometry encodes age.

Each phantom is a stack of nested ellipsoids (background, shell, tissue,
random subregions, ventricle).  The ventricle radius grows linearly with
age, so a regressor that truly reads structure can recover age from
these volumes, and nothing else in the construction correlates with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .seeding import derive_seed
from .volume import GridMeta, LabelVolume, _triple

AGE_MIN = 6.0
AGE_MAX = 95.0
BIMODAL_PEAKS = (25.0, 74.0)
BIMODAL_SD = 8.0
VENTRICLE_BASE_RADIUS = 5.0  # voxels at age 0, before jitter
VENTRICLE_JITTER_SD = 0.15
VENTRICLE_AXES = (1.0, 0.85, 1.15)  # mild anisotropy, same for all ages

BACKGROUND, SHELL, TISSUE, VENTRICLE = 0, 1, 2, 3

AGE_DISTRIBUTIONS = ("uniform", "bimodal")


@dataclass(frozen=True)
class PhantomSpec:
    age_years: float
    seed: int
    dims: tuple[int, int, int] = (64, 64, 64)
    n_labels: int = 8
    atrophy_coeff: float = 0.05  # ventricle radius growth, voxels per year

    def __post_init__(self):
        dims = _triple(self.dims, "dims", dtype=int)
        object.__setattr__(self, "dims", dims)
        if min(dims) < 16:
            raise UsageError(f"dims must be >= 16 per axis, got {dims}")
        if self.n_labels < 4:
            raise UsageError(f"n_labels must be >= 4, got {self.n_labels}")
        if not AGE_MIN <= self.age_years <= AGE_MAX:
            raise UsageError(
                f"age_years must be in [{AGE_MIN}, {AGE_MAX}], got {self.age_years}")
        if not 0 <= self.seed < 2**64:
            raise UsageError(f"seed must fit in 64 bits, got {self.seed}")
        if self.atrophy_coeff < 0:
            raise UsageError(f"atrophy_coeff must be >= 0, got {self.atrophy_coeff}")


def _ellipsoid_mask(dims, center, semi_axes) -> np.ndarray:
    grid = np.indices(dims, dtype=np.float64)
    acc = np.zeros(dims, dtype=np.float64)
    for axis in range(3):
        acc += ((grid[axis] - center[axis]) / semi_axes[axis]) ** 2
    return acc <= 1.0


def make_phantom(spec: PhantomSpec) -> tuple[LabelVolume, float]:
    """Build one phantom; returns the label map and its age.

    The random-number draw order does not depend on age, so two specs
    differing only in age produce geometrically comparable phantoms whose
    ventricles differ purely by the age term.
    """
    rng = np.random.default_rng(spec.seed)
    dims = np.asarray(spec.dims)
    center = (dims - 1) / 2.0

    data = np.zeros(spec.dims, dtype=np.int64)
    outer = 0.44 * dims.min()
    shell_axes = outer * rng.uniform(0.9, 1.0, size=3)
    tissue_axes = shell_axes - rng.uniform(2.0, 4.0)
    data[_ellipsoid_mask(spec.dims, center, shell_axes)] = SHELL
    data[_ellipsoid_mask(spec.dims, center, tissue_axes)] = TISSUE

    # Random age-independent subregions, confined to tissue.
    for label in range(4, spec.n_labels):
        blob_center = center + rng.uniform(-0.4, 0.4, size=3) * tissue_axes
        blob_axes = rng.uniform(3.0, 6.0, size=3)
        blob = _ellipsoid_mask(spec.dims, blob_center, blob_axes)
        data[blob & (data == TISSUE)] = label

    # The ventricle goes last so its geometry is exact, never clipped by
    # a blob; its radius is the only age-dependent quantity.
    jitter = rng.normal(0.0, VENTRICLE_JITTER_SD)
    radius = VENTRICLE_BASE_RADIUS + spec.atrophy_coeff * spec.age_years + jitter
    radius = max(radius, 1.0)
    ventricle_axes = radius * np.asarray(VENTRICLE_AXES)
    data[_ellipsoid_mask(spec.dims, center, ventricle_axes)] = VENTRICLE

    meta = GridMeta.axis_aligned(spec.dims, (1.0, 1.0, 1.0))
    return LabelVolume(meta, data), float(spec.age_years)


def sample_ages(n: int, distribution: str, rng: np.random.Generator) -> np.ndarray:
    """Draw n ages in [6, 95]: flat, or the two-peak cohort shape."""
    if n < 1:
        raise UsageError(f"n must be >= 1, got {n}")
    if distribution not in AGE_DISTRIBUTIONS:
        raise UsageError(
            f"distribution must be one of {AGE_DISTRIBUTIONS}, got {distribution!r}")
    if distribution == "uniform":
        return rng.uniform(AGE_MIN, AGE_MAX, size=n)
    ages = np.empty(n, dtype=np.float64)
    filled = 0
    while filled < n:
        need = n - filled
        peaks = rng.integers(2, size=need)
        draws = rng.normal(np.asarray(BIMODAL_PEAKS)[peaks], BIMODAL_SD)
        keep = draws[(draws >= AGE_MIN) & (draws <= AGE_MAX)]
        ages[filled:filled + len(keep)] = keep
        filled += len(keep)
    return ages


def make_cohort(n: int, age_distribution: str, seed: int,
                dims=(64, 64, 64), n_labels: int = 8,
                atrophy_coeff: float = 0.05) -> list[tuple[LabelVolume, float]]:
    """n phantoms with independently derived seeds and sampled ages."""
    ages = sample_ages(n, age_distribution, np.random.default_rng(seed))
    cohort = []
    for i, age in enumerate(ages):
        spec = PhantomSpec(age_years=float(age), seed=derive_seed(seed, "phantom", i),
                           dims=dims, n_labels=n_labels, atrophy_coeff=atrophy_coeff)
        cohort.append(make_phantom(spec))
    return cohort
