"""Sample loading: volumes from a directory, ages from a CSV.

The directory is the hand-off point from the generator: it holds one NIfTI
per sample, named either `<subject>.nii.gz` or `<subject>_<index>.nii.gz`
for repeated renderings of the same subject. Ages arrive as a CSV with
`subject_id,age` columns; every volume must resolve to a row in it.

Loaded volumes are turned into normalized gradient-magnitude maps before
training. The renderings draw a fresh random contrast per sample, so raw
intensities at a given anatomical point carry almost no stable meaning;
edge strength is invariant to intensity polarity and, after per-volume
normalization, to level and scale, which leaves the network the geometric
signal. The same transform is applied at prediction time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, UsageError
from .nifti import read_volume

AGE_MIN = 6.0
AGE_MAX = 95.0


@dataclass(frozen=True)
class TrainingSample:
    """One volume with its chronological age (equal to the target age here)."""

    name: str
    subject_id: str
    volume: np.ndarray = field(repr=False)
    y_c: float

    def __post_init__(self):
        v = self.volume
        if v.ndim != 3 or v.dtype != np.float32:
            raise UsageError(f"{self.name}: volume must be 3-D float32")
        lo, hi = float(v.min()), float(v.max())
        if lo < -1e-6 or hi > 1.0 + 1e-6:
            raise DataError(f"{self.name}: intensities outside [0, 1] "
                            f"(range {lo:.4g}..{hi:.4g})")
        if not AGE_MIN <= self.y_c <= AGE_MAX:
            raise DataError(f"{self.name}: age {self.y_c} outside "
                            f"[{AGE_MIN}, {AGE_MAX}]")


def read_ages(path) -> dict[str, float]:
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or \
                not {"subject_id", "age"} <= set(reader.fieldnames):
            raise FormatError(f"{path}: need columns subject_id,age, "
                              f"got {reader.fieldnames}")
        ages: dict[str, float] = {}
        for i, row in enumerate(reader, start=2):
            try:
                ages[row["subject_id"]] = float(row["age"])
            except ValueError as exc:
                raise FormatError(f"{path}:{i}: bad age {row['age']!r}") from exc
    if not ages:
        raise FormatError(f"{path}: no age rows")
    return ages


def edge_map(volume: np.ndarray) -> np.ndarray:
    """Central-difference gradient magnitude, scaled to [0, 1] per volume."""
    if volume.ndim != 3:
        raise UsageError(f"edge_map needs a 3-D volume, got shape {volume.shape}")
    gx, gy, gz = np.gradient(volume.astype(np.float64))
    g = np.sqrt(gx * gx + gy * gy + gz * gz)
    peak = g.max()
    if peak > 0:
        g /= peak
    return g.astype(np.float32)


def _stem(path: Path) -> str:
    name = path.name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return name[:-len(suffix)]
    return name


def _subject_for(stem: str, ages: dict[str, float]) -> str | None:
    if stem in ages:
        return stem
    base, _, tail = stem.rpartition("_")
    if base and tail.isdigit() and base in ages:
        return base
    return None


def load_samples(data_dir, ages: dict[str, float]) -> list[TrainingSample]:
    data_dir = Path(data_dir)
    files = sorted(p for p in data_dir.iterdir()
                   if p.name.endswith((".nii", ".nii.gz")))
    if not files:
        raise UsageError(f"no volumes in {data_dir}")
    samples = []
    for path in files:
        stem = _stem(path)
        subject = _subject_for(stem, ages)
        if subject is None:
            raise DataError(f"{path.name}: no matching subject_id in ages CSV")
        volume = edge_map(np.clip(read_volume(path), 0.0, 1.0))
        samples.append(TrainingSample(stem, subject, volume, ages[subject]))
    return samples


def split_train_val(samples, val_fraction: float, seed: int):
    """Split by subject so renderings of one subject never straddle the split.

    A fraction of 0 reuses the training set for validation (overfit runs).
    """
    samples = list(samples)
    if not 0.0 <= val_fraction < 1.0:
        raise UsageError(f"val_fraction must be in [0, 1), got {val_fraction}")
    if val_fraction == 0.0:
        return samples, list(samples)
    subjects = sorted({s.subject_id for s in samples})
    if len(subjects) < 2:
        raise UsageError("need at least 2 subjects to split train/val")
    rng = np.random.default_rng(seed)
    rng.shuffle(subjects)
    n_val = max(1, round(val_fraction * len(subjects)))
    n_val = min(n_val, len(subjects) - 1)
    val_subjects = set(subjects[:n_val])
    train = [s for s in samples if s.subject_id not in val_subjects]
    val = [s for s in samples if s.subject_id in val_subjects]
    return train, val
