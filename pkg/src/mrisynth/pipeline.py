"""End-to-end synthesis: label map in, randomized MRI-like volume out.

generate() runs the fixed stage order (rigid warp, per-label Gaussian
draw, bias field, rescale + gamma, resolution simulation), each stage on
its own named random substream so ablating one never shifts another.
run_batch() fans samples out over worker processes; outputs are bitwise
identical for any worker count because all randomness comes from
(master_seed, subject_id, sample_index).
"""

from __future__ import annotations

import csv
import multiprocessing
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import GeneratorConfig, load_config
from .errors import ConfigError, MriSynthError
from .gmm import (
    GaussianPriorSet,
    LabelParams,
    sample_params_gaussian,
    sample_params_uniform,
    synthesize,
)
from .corrupt import (
    apply_bias,
    gamma_transform,
    sample_bias_field,
    sample_gamma,
    sample_resolution,
    simulate_resolution,
)
from .rigid import apply_rigid_labels, sample_rigid
from .seeding import SampleSeed, sample_key, stage_rng
from .volume import (
    IntensityVolume,
    LabelVolume,
    crop_or_pad,
    load_volume,
    rescale_01,
    resample,
    save_volume,
)

MANIFEST_HEADER = ("subject_id", "sample_index", "seed", "path")


def _load_priors(cfg: GeneratorConfig) -> GaussianPriorSet | None:
    if cfg.prior_mode != "gaussian":
        return None
    if not Path(cfg.prior_file).exists():
        raise ConfigError(f"prior file not found: {cfg.prior_file}")
    return GaussianPriorSet.load(cfg.prior_file)


def _sample_label_params(s: LabelVolume, cfg: GeneratorConfig, seed: SampleSeed,
                         priors: GaussianPriorSet | None) -> LabelParams:
    rng = stage_rng(seed, "prior")
    if cfg.prior_mode == "uniform":
        params = sample_params_uniform(cfg.uniform_prior, s.label_set, rng)
    else:
        params, _ = sample_params_gaussian(priors, "random", rng)
    # The background draw happens unconditionally so that the params of a
    # sample are a pure function of its seed, label map aside.
    zero_background = stage_rng(seed, "background").random() < cfg.background_zero_prob
    if zero_background and 0 in params.mu:
        mu = dict(params.mu)
        sigma = dict(params.sigma)
        mu[0] = 0.0
        sigma[0] = 0.0
        params = LabelParams(mu, sigma)
    return params


def generate(s: LabelVolume, cfg: GeneratorConfig, seed: SampleSeed,
             priors: GaussianPriorSet | None = None) -> IntensityVolume:
    """Draw one synthetic volume from the generative process.

    `priors` short-circuits re-reading cfg.prior_file on every call; when
    omitted it is loaded on demand under gaussian prior mode.
    """
    if priors is None:
        priors = _load_priors(cfg)

    transform = sample_rigid(cfg.rigid, stage_rng(seed, "rigid"),
                             center_mm=s.meta.center_world())
    warped = apply_rigid_labels(s, transform)

    params = _sample_label_params(warped, cfg, seed, priors)
    x = synthesize(warped, params, stage_rng(seed, "synth"))

    if cfg.bias.enabled:
        field = sample_bias_field(x.meta, cfg.bias, stage_rng(seed, "bias"))
        x = apply_bias(x, field)

    x = rescale_01(x)
    if cfg.gamma.enabled:
        x = gamma_transform(x, sample_gamma(cfg.gamma, stage_rng(seed, "gamma")))

    if cfg.resolution.enabled:
        target = sample_resolution(cfg.resolution, x.meta.spacing,
                                   stage_rng(seed, "resolution"))
        # A sampled spacing finer than the native grid would mean
        # upsampling; keep such axes at native resolution instead.
        target = tuple(max(t, n) for t, n in zip(target, x.meta.spacing))
        x = simulate_resolution(x, target)
    return x


def preprocess_for_training(x: IntensityVolume, cfg: GeneratorConfig) -> IntensityVolume:
    """Fixed input contract for the regressor: resample to the output
    spacing, center crop/pad to the output dims, rescale to [0, 1]."""
    spacing = (cfg.output.spacing_mm,) * 3
    resampled = resample(x, spacing, "trilinear")
    sized = crop_or_pad(resampled, cfg.output.dims, fill=0.0)
    return rescale_01(sized)


# ---------------------------------------------------------------------------
# Batch generation
# ---------------------------------------------------------------------------

def subject_id_from_path(path) -> str:
    name = Path(path).name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


def list_segmentations(seg_dir) -> list[Path]:
    seg_dir = Path(seg_dir)
    paths = sorted(p for p in seg_dir.iterdir()
                   if p.name.endswith((".nii", ".nii.gz")))
    return paths


def _produce_subject(args) -> list[dict]:
    """Generate and write all samples of one subject; one manifest row each.

    Failures are reported in the row's path field so one bad input cannot
    take down the batch.
    """
    seg_path, cfg, out_dir, samples_per_subject, priors = args
    subject = subject_id_from_path(seg_path)
    rows = []
    try:
        s = load_volume(seg_path, "label")
    except MriSynthError as exc:
        s = None
        error = f"ERROR: {exc}"
    for index in range(samples_per_subject):
        seed = SampleSeed(cfg.master_seed, subject, index)
        row = {"subject_id": subject, "sample_index": index,
               "seed": sample_key(seed)}
        if s is None:
            row["path"] = error
        else:
            name = f"{subject}_{index}.nii.gz"
            out_path = Path(out_dir) / name
            x = preprocess_for_training(generate(s, cfg, seed, priors), cfg)
            save_volume(x, out_path)
            # Relative to out_dir so a manifest stays valid if the dataset
            # directory is moved, and identical runs give identical bytes.
            row["path"] = name
        rows.append(row)
    return rows


def run_batch(seg_dir, cfg, out_dir, samples_per_subject: int = 1,
              workers: int = 1) -> list[dict]:
    """Generate samples_per_subject volumes per segmentation in seg_dir.

    Writes `<subject>_<index>.nii.gz` files plus `manifest.csv` into
    out_dir and returns the manifest rows.  The output is a pure function
    of (directory contents, config); worker count only affects speed.
    """
    if not isinstance(cfg, GeneratorConfig):
        cfg = load_config(cfg)
    if samples_per_subject < 1:
        raise ConfigError(f"samples_per_subject must be >= 1, got {samples_per_subject}")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    seg_paths = list_segmentations(seg_dir)
    if not seg_paths:
        raise ConfigError(f"no .nii/.nii.gz files in {seg_dir}")
    priors = _load_priors(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(p, cfg, out_dir, samples_per_subject, priors) for p in seg_paths]
    if workers == 1:
        results = [_produce_subject(t) for t in tasks]
    else:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_produce_subject, tasks)

    rows = [row for subject_rows in results for row in subject_rows]
    rows.sort(key=lambda r: (r["subject_id"], r["sample_index"]))
    write_manifest(rows, out_dir / "manifest.csv")
    return rows


def write_manifest(rows, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=MANIFEST_HEADER)
        writer.writeheader()
        writer.writerows(rows)


def iter_stream(seg_paths, cfg: GeneratorConfig, out_dir, samples_per_subject: int = 1):
    """Single-process streaming variant: yield manifest rows as produced."""
    priors = _load_priors(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for seg_path in seg_paths:
        yield from _produce_subject((seg_path, cfg, out_dir, samples_per_subject, priors))


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchReport:
    samples: int
    workers: int
    wall_seconds: float
    samples_per_second: float
    p50_seconds: float
    p95_seconds: float


_BENCH_STATE: dict = {}


def _bench_init(seg_path, cfg):
    _BENCH_STATE["seg"] = load_volume(seg_path, "label")
    _BENCH_STATE["cfg"] = cfg
    _BENCH_STATE["priors"] = _load_priors(cfg)


def _bench_one(index: int) -> float:
    s, cfg, priors = _BENCH_STATE["seg"], _BENCH_STATE["cfg"], _BENCH_STATE["priors"]
    seed = SampleSeed(cfg.master_seed, "bench", index)
    start = time.perf_counter()
    preprocess_for_training(generate(s, cfg, seed, priors), cfg)
    return time.perf_counter() - start


def bench(seg_path, cfg, iterations: int = 10, workers: int = 1) -> BenchReport:
    """Time generate+preprocess end-to-end over `iterations` samples."""
    if not isinstance(cfg, GeneratorConfig):
        cfg = load_config(cfg)
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    start = time.perf_counter()
    if workers == 1:
        _bench_init(seg_path, cfg)
        latencies = [_bench_one(i) for i in range(iterations)]
        _BENCH_STATE.clear()
    else:
        with multiprocessing.Pool(workers, initializer=_bench_init,
                                  initargs=(seg_path, cfg)) as pool:
            latencies = pool.map(_bench_one, range(iterations))
    wall = time.perf_counter() - start
    latencies = np.sort(latencies)
    return BenchReport(
        samples=iterations,
        workers=workers,
        wall_seconds=wall,
        samples_per_second=iterations / wall,
        p50_seconds=float(np.percentile(latencies, 50)),
        p95_seconds=float(np.percentile(latencies, 95)),
    )
