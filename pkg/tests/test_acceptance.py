"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with `pytest tests/test_acceptance.py -s` to see the verdict lines.
Every criterion is asserted at its stated tolerance; the parallel-throughput
figure is reported but not gated (this box may have a single CPU core).
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
import scipy.stats

from mrisynth.config import GeneratorConfig, OutputConfig
from mrisynth.corrupt import (
    BiasFieldConfig,
    GammaConfig,
    apply_bias,
    gamma_transform,
    sample_bias_field,
    simulate_resolution,
)
from mrisynth.gmm import (
    GaussianPriorSet,
    LabelPriorParams,
    UniformPrior,
    estimate_priors,
    sample_params_gaussian,
    sample_params_uniform,
    synthesize,
)
from mrisynth.metrics import PredictionRecord, TestSetResult, aggregate, mae, pearson
from mrisynth.phantom import PhantomSpec, make_phantom
from mrisynth.pipeline import bench, generate, preprocess_for_training, run_batch
from mrisynth.rigid import (
    IDENTITY,
    RigidSamplingConfig,
    RigidTransform3D,
    apply_rigid_labels,
    sample_rigid,
)
from mrisynth.seeding import SampleSeed
from mrisynth.volume import GridMeta, IntensityVolume, LabelVolume, save_volume


@contextmanager
def criterion(name, budget_seconds=None):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget_seconds is not None:
            assert elapsed < budget_seconds, (
                f"{name} took {elapsed:.1f}s, budget {budget_seconds}s")
    except BaseException:
        print(f"\n[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"\n[ACCEPTANCE] {name}: PASS ({elapsed:.1f}s)")


def _phantom_file(tmp_path, name, seed, dims):
    vol, _ = make_phantom(PhantomSpec(age_years=50.0, seed=seed, dims=dims))
    path = tmp_path / f"{name}.nii.gz"
    save_volume(vol, path)
    return path


# ---------------------------------------------------------------------------
# Determinism: same seed gives identical bytes, and batch output does not
# depend on the worker count.
# ---------------------------------------------------------------------------

def test_determinism(tmp_path):
    with criterion("determinism", budget_seconds=60):
        cfg = GeneratorConfig(master_seed=2024,
                              output=OutputConfig(dims=(64, 64, 64)))
        seg, _ = make_phantom(PhantomSpec(age_years=44.0, seed=5, dims=(48, 48, 48)))

        seed = SampleSeed(cfg.master_seed, "sub-a", 0)
        paths = []
        for run in range(2):
            x = preprocess_for_training(generate(seg, cfg, seed), cfg)
            path = tmp_path / f"run{run}.nii.gz"
            save_volume(x, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

        other = preprocess_for_training(
            generate(seg, cfg, SampleSeed(cfg.master_seed, "sub-a", 1)), cfg)
        assert not np.array_equal(other.data, x.data)

        seg_dir = tmp_path / "segs"
        seg_dir.mkdir()
        for i in range(2):
            _phantom_file(seg_dir, f"sub-{i}", seed=10 + i, dims=(40, 40, 40))
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        run_batch(seg_dir, cfg, out1, samples_per_subject=2, workers=1)
        run_batch(seg_dir, cfg, out2, samples_per_subject=2, workers=2)
        names = sorted(p.name for p in out1.iterdir())
        assert names == sorted(p.name for p in out2.iterdir())
        for name in names:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


# ---------------------------------------------------------------------------
# Intensity model statistics: sampled regions match their parameters, and
# estimation inverts generation, both within 3 standard errors.
# ---------------------------------------------------------------------------

def _two_slabs(dims=(20, 20, 20)):
    data = np.ones(dims, dtype=np.int64)
    data[dims[0] // 2:] = 2
    meta = GridMeta.axis_aligned(dims, (1.0, 1.0, 1.0))
    return LabelVolume(meta, data)


def test_gmm_statistics():
    with criterion("gmm_statistics", budget_seconds=120):
        s = _two_slabs()
        n = int(np.count_nonzero(s.data == 1))
        assert n >= 1000
        prior = UniformPrior()
        for draw in range(5):
            rng = np.random.default_rng(300 + draw)
            params = sample_params_uniform(prior, s.label_set, rng)
            img = synthesize(s, params, rng)
            for label in (1, 2):
                region = img.data[s.data == label].astype(np.float64)
                mu, sigma = params.mu[label], params.sigma[label]
                se_mean = sigma / math.sqrt(n)
                se_std = sigma / math.sqrt(2 * n)
                assert abs(region.mean() - mu) <= 3 * se_mean + 1e-6
                assert abs(region.std(ddof=0) - sigma) <= 3 * se_std + 1e-6

        # Generate from a known prior, then recover its hyperparameters.
        anchors = {0: LabelPriorParams(0.0, 0.0, 0.0, 0.0),
                   9: LabelPriorParams(1.0, 0.0, 0.0, 0.0)}
        targets = {1: LabelPriorParams(0.35, 0.03, 0.04, 0.008),
                   2: LabelPriorParams(0.65, 0.03, 0.05, 0.008)}
        priors = GaussianPriorSet(({**anchors, **targets},), ("syn",))
        data = np.ones((20, 20, 20), dtype=np.int64)
        data[10:] = 2
        data[0] = 0
        data[-1] = 9
        seg = LabelVolume(GridMeta.axis_aligned((20, 20, 20), (1.0, 1.0, 1.0)), data)
        n_vox = int(np.count_nonzero(seg.data == 1))
        assert n_vox >= 1000

        rng = np.random.default_rng(77)
        n_images = 20
        pairs = []
        for _ in range(n_images):
            params, chosen = sample_params_gaussian(priors, "random", rng)
            assert chosen == 0
            pairs.append((synthesize(seg, params, rng), seg))
        est = estimate_priors({"syn": pairs}).sequences[0]
        for label, true in targets.items():
            se_mu = math.sqrt(true.sigma_mu ** 2
                              + true.mu_sigma ** 2 / n_vox) / math.sqrt(n_images)
            se_sigma = math.sqrt(true.sigma_sigma ** 2
                                 + true.mu_sigma ** 2 / (2 * n_vox)) / math.sqrt(n_images)
            assert abs(est[label].mu_mu - true.mu_mu) <= 3 * se_mu
            assert abs(est[label].mu_sigma - true.mu_sigma) <= 3 * se_sigma


# ---------------------------------------------------------------------------
# Rigid geometry: identity is bit-exact, quarter-turns with whole-voxel
# shifts match direct index arithmetic, labels never appear from nowhere,
# and sampled rotations are orthonormal.
# ---------------------------------------------------------------------------

_QUARTER_TURNS = {
    "x": np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]]),
    "y": np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]]),
    "z": np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]]),
}


def _index_oracle(data, rot, translation, center):
    """Pull-based gather by exact integer index arithmetic."""
    dims = data.shape
    p = np.indices(dims, dtype=np.float64).reshape(3, -1)
    src = rot.T @ (p - np.reshape(center, (3, 1)) - np.reshape(translation, (3, 1)))
    src = np.rint(src + np.reshape(center, (3, 1))).astype(np.int64)
    inside = np.all((src >= 0) & (src < np.reshape(dims, (3, 1))), axis=0)
    out = np.zeros(data.size, dtype=data.dtype)
    out[inside] = data[src[0, inside], src[1, inside], src[2, inside]]
    return out.reshape(dims)


def test_rigid_geometry():
    with criterion("rigid_geometry", budget_seconds=60):
        rng = np.random.default_rng(8)
        data = rng.integers(0, 6, (21, 21, 21))
        v = LabelVolume(GridMeta.axis_aligned((21, 21, 21), (1.0, 1.0, 1.0)), data)
        center = v.meta.center_world()

        out = apply_rigid_labels(v, IDENTITY)
        np.testing.assert_array_equal(out.data, v.data)

        angles = {"x": (90.0, 0.0, 0.0), "y": (0.0, 90.0, 0.0), "z": (0.0, 0.0, 90.0)}
        translation = (2.0, -3.0, 1.0)
        for axis, rot in _QUARTER_TURNS.items():
            t = RigidTransform3D(angles[axis], translation, tuple(center))
            got = apply_rigid_labels(v, t)
            want = _index_oracle(v.data, rot, translation, center)
            np.testing.assert_array_equal(got.data, want, err_msg=f"axis {axis}")

        sparse = LabelVolume(v.meta, rng.choice([0, 2, 5, 7], size=(21, 21, 21)))
        cfg = RigidSamplingConfig()
        for i in range(10):
            t = sample_rigid(cfg, np.random.default_rng(i), tuple(center))
            moved = apply_rigid_labels(sparse, t)
            assert set(moved.label_set) <= set(sparse.label_set) | {0}

        for i in range(100):
            t = sample_rigid(cfg, np.random.default_rng(1000 + i), (0.0, 0.0, 0.0))
            rot = t.rotation_matrix
            assert np.abs(rot.T @ rot - np.eye(3)).max() < 1e-6
            assert abs(np.linalg.det(rot) - 1.0) < 1e-6


# ---------------------------------------------------------------------------
# Corruption operators: bias fields are strictly positive and vanish at zero
# amplitude, the gamma map fixes 0 and 1 and preserves order, and resolution
# simulation is the identity at native spacing, keeps constants, and crushes
# a voxel-frequency grating at ratio 4.
# ---------------------------------------------------------------------------

def test_corruption_ops():
    with criterion("corruption_ops", budget_seconds=120):
        meta = GridMeta.axis_aligned((32, 32, 32), (1.0, 1.0, 1.0))
        for i in range(10):
            field = sample_bias_field(meta, BiasFieldConfig(), np.random.default_rng(i))
            assert np.all(field.data > 0)
        flat = sample_bias_field(meta, BiasFieldConfig(amplitude=0.0),
                                 np.random.default_rng(0))
        assert np.all(flat.data == 1.0)
        x = IntensityVolume(meta, np.random.default_rng(1).random((32, 32, 32),
                                                                 dtype=np.float32))
        np.testing.assert_array_equal(apply_bias(x, flat).data, x.data)

        assert np.array_equal(gamma_transform(x, 1.0).data, x.data)
        pinned = np.clip(np.array(x.data), 0.0, 1.0)
        pinned[0, 0, 0] = 0.0
        pinned[-1, -1, -1] = 1.0
        edge = IntensityVolume(meta, pinned)
        for i in range(20):
            g = float(np.exp(np.random.default_rng(i).normal(0.0, 0.3)))
            y = gamma_transform(edge, g)
            assert y.data[0, 0, 0] == 0.0 and y.data[-1, -1, -1] == 1.0

        n = 100_000
        values = np.sort(np.random.default_rng(9).random(n, dtype=np.float32))
        big = IntensityVolume(GridMeta.axis_aligned((n, 1, 1), (1.0, 1.0, 1.0)),
                              values.reshape(n, 1, 1))
        out = gamma_transform(big, 1.7).data.ravel()
        assert np.all(np.diff(out) >= 0)

        same = simulate_resolution(x, (1.0, 1.0, 1.0))
        np.testing.assert_array_equal(same.data, x.data)

        const = IntensityVolume(GridMeta.axis_aligned((50, 50, 50), (1.0, 1.0, 1.0)),
                                np.full((50, 50, 50), 0.37, dtype=np.float32))
        low = simulate_resolution(const, (2.5, 2.5, 2.5))
        assert np.abs(low.data - 0.37).max() < 1e-5

        dims = (64, 16, 16)
        i = np.arange(dims[0], dtype=np.float64).reshape(-1, 1, 1)
        grating = 0.5 + 0.4 * np.cos(np.pi * i) * np.ones(dims)
        g = IntensityVolume(GridMeta.axis_aligned(dims, (1.0, 1.0, 1.0)),
                            grating.astype(np.float32))
        blurred = simulate_resolution(g, (4.0, 1.0, 1.0))
        attenuation = 1.0 - float(blurred.data.std()) / float(g.data.std())
        assert attenuation >= 0.80, f"attenuation {attenuation:.3f}"


# ---------------------------------------------------------------------------
# Preprocessing contract: whatever comes in, out comes a 130^3 grid at
# 1.4 mm with intensities in [0, 1].
# ---------------------------------------------------------------------------

def test_preprocess_contract():
    with criterion("preprocess_contract", budget_seconds=60):
        cfg = GeneratorConfig()
        cases = [((182, 218, 182), (1.0, 1.0, 1.0)),
                 ((91, 109, 91), (2.0, 2.0, 2.0)),
                 ((40, 40, 40), (1.0, 1.0, 1.0))]
        rng = np.random.default_rng(4)
        for dims, spacing in cases:
            x = IntensityVolume(GridMeta.axis_aligned(dims, spacing),
                                rng.random(dims, dtype=np.float32) * 500.0)
            y = preprocess_for_training(x, cfg)
            assert y.meta.dims == (130, 130, 130)
            assert y.meta.spacing == (1.4, 1.4, 1.4)
            assert float(y.data.min()) >= 0.0 and float(y.data.max()) <= 1.0


# ---------------------------------------------------------------------------
# Evaluation arithmetic: published-style aggregates land within 0.1 year,
# and MAE / correlation agree with brute-force recomputation.
# ---------------------------------------------------------------------------

def _brute_mae(records):
    errors = [abs(r.y_pred - r.y_true) for r in records]
    m = sum(errors) / len(errors)
    return m, math.sqrt(sum((e - m) ** 2 for e in errors) / len(errors))


def _brute_r(records):
    xs = [r.y_pred - r.y_true for r in records]
    ys = [r.score for r in records]
    n = len(records)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    sxx = sum((a - mx) ** 2 for a in xs)
    syy = sum((b - my) ** 2 for b in ys)
    return sxy / math.sqrt(sxx * syy)


def test_eval_arithmetic():
    with criterion("eval_arithmetic", budget_seconds=60):
        sets = [TestSetResult(f"d{i+1}", m, 0.0, 100)
                for i, m in enumerate([3.8, 5.1, 4.5, 5.2, 5.0])]
        full = aggregate(sets)
        assert abs(full.avg_mae - 4.7) <= 0.1
        assert abs(full.across_set_std - 0.61) <= 0.1
        part = aggregate(sets, subset=["d3", "d4", "d5"])
        assert abs(part.avg_mae - 4.9) <= 0.1
        assert abs(part.across_set_std - 0.40) <= 0.1

        rng = np.random.default_rng(12)
        for _ in range(1000):
            n = int(rng.integers(3, 50))
            y_true = rng.uniform(10, 90, n)
            y_pred = y_true + rng.normal(0, 5, n)
            score = rng.normal(0, 1, n)
            records = [PredictionRecord(f"s{i}", y_true[i], y_pred[i], score[i])
                       for i in range(n)]
            got_mae, got_std = mae(records)
            want_mae, want_std = _brute_mae(records)
            assert abs(got_mae - want_mae) < 1e-10
            assert abs(got_std - want_std) < 1e-10
            got_r, got_p = pearson(records)
            assert abs(got_r - _brute_r(records)) < 1e-10
            want_r, want_p = scipy.stats.pearsonr([r.y_pred - r.y_true
                                                   for r in records],
                                                  [r.score for r in records])
            assert abs(got_r - want_r) < 1e-10
            assert abs(got_p - want_p) < 1e-8


# ---------------------------------------------------------------------------
# Throughput: a full-size sample end to end in at most 2 seconds on one
# worker. The 4-worker speedup is printed for the record but not gated.
# ---------------------------------------------------------------------------

def test_throughput(tmp_path):
    with criterion("throughput_single_worker", budget_seconds=300):
        seg_path = _phantom_file(tmp_path, "big", seed=21, dims=(160, 160, 160))
        cfg = GeneratorConfig()
        single = bench(seg_path, cfg, iterations=3, workers=1)
        print(f"\n  single worker: p50 {single.p50_seconds:.2f}s, "
              f"p95 {single.p95_seconds:.2f}s per sample")
        assert single.p50_seconds <= 2.0

        parallel = bench(seg_path, cfg, iterations=4, workers=4)
        speedup = parallel.samples_per_second / single.samples_per_second
        print(f"  4 workers: {parallel.samples_per_second:.2f} samples/s, "
              f"speedup x{speedup:.2f} (soft target >= 3, reported, not gated)")
