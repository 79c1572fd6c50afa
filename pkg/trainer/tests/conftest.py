"""Shared helpers: drive the generator CLI to build datasets for the trainer.

The generator is a separate package; everything here goes through its command
line and file formats, never its Python API.
"""

import json
import shutil
import subprocess
import sys

import pytest


def run_cli(module, args):
    proc = subprocess.run([sys.executable, "-m", module, *args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, (
        f"{module} {' '.join(args)} failed ({proc.returncode}):\n{proc.stderr}")
    return proc.stdout


def make_phantoms(out_dir, n, dims, seed, dist="bimodal"):
    run_cli("mrisynth", ["phantom", "--n", str(n), "--dims", str(dims),
                         "--dist", dist, "--seed", str(seed),
                         "--out", str(out_dir)])
    return out_dir


def render(phantom_dir, out_dir, config: dict, samples_per_subject=1):
    """run-batch the phantoms, then drop ages.csv next to the renders so the
    directory is self-describing for training and prediction."""
    cfg_path = out_dir.parent / f"{out_dir.name}-config.json"
    cfg_path.write_text(json.dumps(config))
    run_cli("mrisynth", ["run-batch", "--segs", str(phantom_dir),
                         "--config", str(cfg_path),
                         "--samples", str(samples_per_subject),
                         "--out", str(out_dir)])
    shutil.copy(phantom_dir / "ages.csv", out_dir / "ages.csv")
    return out_dir


def render_config(dims, master_seed, **overrides):
    """Generator config for phantom-scale output: native 1 mm grid, mild
    translations so small heads stay in the field of view."""
    cfg = {
        "master_seed": master_seed,
        "rigid": {"rot_range_deg": 15.0, "trans_range_mm": 6.0},
        "output": {"spacing_mm": 1.0, "dims": [dims, dims, dims]},
    }
    cfg.update(overrides)
    return cfg


# Mean intensity per label for a fixed-appearance rendering. Chosen so every
# structure is separated from its neighbours; the exact values only need to be
# distinct and stable.
SMOKE_CONTRAST = {0: 0.0, 1: 0.85, 2: 0.45, 3: 0.05, 4: 0.6, 5: 0.3, 6: 0.7, 7: 0.2}


def write_priors(path, sequences, sigma_mu=0.0, mu_sigma=0.02, sigma_sigma=0.0):
    """Write a contrast-prior file mapping each label to sampling parameters
    [mean-of-mean, spread-of-mean, mean-of-std, spread-of-std]. `sequences`
    maps a sequence name to its label -> mean-intensity table."""
    doc = {"sequences": [
        {"name": name,
         "labels": {str(label): [mu, sigma_mu, mu_sigma, sigma_sigma]
                    for label, mu in contrast.items()}}
        for name, contrast in sequences.items()]}
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="session")
def smoke_renders(tmp_path_factory):
    """20 phantoms at 64 voxels, each rendered three times with a fixed
    contrast and no corruptions, so memorization tests exercise optimization
    rather than appearance nuisances."""
    root = tmp_path_factory.mktemp("smoke")
    phantoms = make_phantoms(root / "phantoms", n=20, dims=64, seed=41,
                             dist="uniform")
    priors = write_priors(root / "priors.json", {"fixed": SMOKE_CONTRAST})
    config = {
        "master_seed": 7,
        "rigid": {"rot_range_deg": 0.0, "trans_range_mm": 0.0},
        "prior_mode": "gaussian",
        "prior_file": str(priors),
        "bias": {"enabled": False},
        "gamma": {"enabled": False},
        "resolution": {"enabled": False},
        "background_zero_prob": 1.0,
        "output": {"spacing_mm": 1.0, "dims": [64, 64, 64]},
    }
    return render(phantoms, root / "renders", config, samples_per_subject=3)


@pytest.fixture(scope="session")
def tiny_renders(tmp_path_factory):
    """6 rendered phantoms at 24 voxels, for fast CLI and loader tests."""
    root = tmp_path_factory.mktemp("tiny")
    phantoms = make_phantoms(root / "phantoms", n=6, dims=24, seed=13)
    return render(phantoms, root / "renders",
                  render_config(24, master_seed=3), samples_per_subject=2)
