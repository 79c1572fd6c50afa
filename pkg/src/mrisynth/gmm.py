"""Per-label Gaussian intensity synthesis and prior estimation.

An intensity image is produced from a label map by drawing every voxel of
region l independently from N(mu_l, sigma_l).  The per-label parameters
come either from a fixed uniform prior (fully randomized contrast) or
from Gaussian priors estimated per MRI sequence, one of which is picked
at random per sample.  All intensities live on the [0, 1] scale of
rescaled images, so estimated priors and synthesis agree on units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, CoverageError, UsageError
from .volume import IntensityVolume, LabelVolume, rescale_01

SIGMA_FLOOR = 0.01  # spread assigned when a sequence has a single image


@dataclass(frozen=True)
class UniformPrior:
    """mu_l ~ U[mu_a, mu_b], sigma_l ~ U[sigma_a, sigma_b]."""

    mu_a: float = 0.0
    mu_b: float = 1.0
    sigma_a: float = 0.0
    sigma_b: float = 0.25

    def __post_init__(self):
        if self.mu_a > self.mu_b:
            raise UsageError(f"mu_a={self.mu_a} > mu_b={self.mu_b}")
        if not 0 <= self.sigma_a <= self.sigma_b:
            raise UsageError(f"need 0 <= sigma_a <= sigma_b, got "
                             f"({self.sigma_a}, {self.sigma_b})")


@dataclass(frozen=True)
class LabelPriorParams:
    """Hyper-parameters of one label under one sequence."""

    mu_mu: float
    sigma_mu: float
    mu_sigma: float
    sigma_sigma: float

    def __post_init__(self):
        if min(self.sigma_mu, self.mu_sigma, self.sigma_sigma) < 0:
            raise UsageError("sigma_mu, mu_sigma and sigma_sigma must be >= 0")


@dataclass(frozen=True)
class GaussianPriorSet:
    """K sequences, each mapping every label to its four hyper-parameters."""

    sequences: tuple[dict[int, LabelPriorParams], ...]
    sequence_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.sequences) < 1:
            raise UsageError("need at least one sequence")
        if len(self.sequence_names) != len(self.sequences):
            raise UsageError("sequence_names/sequences length mismatch")
        labels = set(self.sequences[0])
        for name, seq in zip(self.sequence_names, self.sequences):
            if set(seq) != labels:
                raise CoverageError(f"sequence {name!r} covers different labels")

    @property
    def k(self) -> int:
        return len(self.sequences)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(sorted(self.sequences[0]))

    def to_json_dict(self) -> dict:
        return {"sequences": [
            {"name": name,
             "labels": {str(l): [p.mu_mu, p.sigma_mu, p.mu_sigma, p.sigma_sigma]
                        for l, p in sorted(seq.items())}}
            for name, seq in zip(self.sequence_names, self.sequences)]}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GaussianPriorSet":
        try:
            entries = doc["sequences"]
            names = tuple(e["name"] for e in entries)
            seqs = tuple(
                {int(l): LabelPriorParams(*map(float, vals))
                 for l, vals in e["labels"].items()}
                for e in entries)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed prior document: {exc}") from exc
        return cls(seqs, names)

    @classmethod
    def load(cls, path) -> "GaussianPriorSet":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_json_dict(doc)


@dataclass(frozen=True)
class LabelParams:
    """One concrete (mu_l, sigma_l) assignment per label."""

    mu: dict[int, float]
    sigma: dict[int, float]

    def __post_init__(self):
        if set(self.mu) != set(self.sigma):
            raise UsageError("mu/sigma label sets differ")
        if any(s < 0 for s in self.sigma.values()):
            raise UsageError("sigma_l must be >= 0")

    def labels(self) -> tuple[int, ...]:
        return tuple(sorted(self.mu))


# ---------------------------------------------------------------------------
# Parameter sampling
# ---------------------------------------------------------------------------

def sample_params_uniform(prior: UniformPrior, labels, rng: np.random.Generator) -> LabelParams:
    """Independent U[mu_a,mu_b] / U[sigma_a,sigma_b] draw per label."""
    labels = sorted(int(l) for l in labels)
    if not labels:
        raise UsageError("labels must be non-empty")
    mus = rng.uniform(prior.mu_a, prior.mu_b, size=len(labels))
    sigmas = rng.uniform(prior.sigma_a, prior.sigma_b, size=len(labels))
    return LabelParams(dict(zip(labels, mus.tolist())), dict(zip(labels, sigmas.tolist())))


def sample_params_gaussian(priors: GaussianPriorSet, k, rng: np.random.Generator
                           ) -> tuple[LabelParams, int]:
    """Draw (mu_l, sigma_l) from the k-th sequence prior; k='random' picks
    a sequence uniformly first.  Negative sigma draws are clamped to 0."""
    if k == "random":
        chosen = int(rng.integers(priors.k))
    else:
        chosen = int(k)
        if not 0 <= chosen < priors.k:
            raise UsageError(f"sequence index {chosen} out of range [0, {priors.k})")
    seq = priors.sequences[chosen]
    labels = sorted(seq)
    mu_mu = np.array([seq[l].mu_mu for l in labels])
    sigma_mu = np.array([seq[l].sigma_mu for l in labels])
    mu_sigma = np.array([seq[l].mu_sigma for l in labels])
    sigma_sigma = np.array([seq[l].sigma_sigma for l in labels])
    mus = rng.normal(mu_mu, sigma_mu)
    sigmas = np.maximum(rng.normal(mu_sigma, sigma_sigma), 0.0)
    return (LabelParams(dict(zip(labels, mus.tolist())), dict(zip(labels, sigmas.tolist()))),
            chosen)


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

def synthesize(s: LabelVolume, params: LabelParams, rng: np.random.Generator) -> IntensityVolume:
    """Voxelwise draws x_ijk ~ N(mu_l, sigma_l) for l = label at (i,j,k)."""
    missing = set(s.label_set) - set(params.mu)
    if missing:
        raise CoverageError(f"params missing labels {sorted(missing)}")
    max_label = max(s.label_set)
    mu_lut = np.zeros(max_label + 1, dtype=np.float64)
    sigma_lut = np.zeros(max_label + 1, dtype=np.float64)
    for l in s.label_set:
        mu_lut[l] = params.mu[l]
        sigma_lut[l] = params.sigma[l]
    noise = rng.standard_normal(s.meta.dims)
    data = mu_lut[s.data] + sigma_lut[s.data] * noise
    return IntensityVolume(s.meta, data)


# ---------------------------------------------------------------------------
# Prior estimation
# ---------------------------------------------------------------------------

def _region_stats(image: IntensityVolume, seg: LabelVolume) -> dict[int, tuple[float, float]]:
    """Per-label (mean, population std) of the image over each region."""
    data = image.data.astype(np.float64).ravel()
    labels = seg.data.ravel().astype(np.int64)
    max_label = int(labels.max())
    counts = np.bincount(labels, minlength=max_label + 1)
    sums = np.bincount(labels, weights=data, minlength=max_label + 1)
    sqsums = np.bincount(labels, weights=data * data, minlength=max_label + 1)
    out = {}
    for l in np.nonzero(counts)[0]:
        n = counts[l]
        mean = sums[l] / n
        var = max(sqsums[l] / n - mean * mean, 0.0)
        out[int(l)] = (float(mean), float(np.sqrt(var)))
    return out


def estimate_priors(pairs_by_sequence: dict, labels=None) -> GaussianPriorSet:
    """Estimate per-sequence Gaussian priors from (image, segmentation) pairs.

    For each image the per-label region mean and std are computed on the
    [0,1]-rescaled image; across images the prior is their mean and sample
    std (n-1).  Sequences with a single image get the spread floor
    SIGMA_FLOOR.  Labels absent from one image are skipped for that image;
    a label absent from every image of a sequence is a coverage error.
    """
    if not pairs_by_sequence:
        raise UsageError("need at least one sequence")
    per_seq_stats = {}
    for name, pairs in pairs_by_sequence.items():
        if not pairs:
            raise UsageError(f"sequence {name!r} has no images")
        stats = []
        for image, seg in pairs:
            if image.meta.dims != seg.meta.dims:
                raise UsageError(
                    f"sequence {name!r}: image dims {image.meta.dims} != "
                    f"segmentation dims {seg.meta.dims}")
            stats.append(_region_stats(rescale_01(image), seg))
        per_seq_stats[name] = stats

    if labels is None:
        labels = sorted({l for stats in per_seq_stats.values()
                        for s in stats for l in s})
    else:
        labels = sorted(int(l) for l in labels)

    sequences = []
    for name, stats in per_seq_stats.items():
        entry = {}
        for l in labels:
            means = [s[l][0] for s in stats if l in s]
            stds = [s[l][1] for s in stats if l in s]
            if not means:
                raise CoverageError(
                    f"label {l} absent from every image of sequence {name!r}")
            if len(means) == 1:
                entry[l] = LabelPriorParams(means[0], SIGMA_FLOOR, stds[0], SIGMA_FLOOR)
            else:
                entry[l] = LabelPriorParams(
                    float(np.mean(means)), float(np.std(means, ddof=1)),
                    float(np.mean(stds)), float(np.std(stds, ddof=1)))
        sequences.append(entry)
    return GaussianPriorSet(tuple(sequences), tuple(per_seq_stats))
