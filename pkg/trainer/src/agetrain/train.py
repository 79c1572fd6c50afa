"""Training loop, checkpointing, prediction export, gradient verification.

The objective is the mean absolute error between predicted and chronological
age, optimized with decoupled-weight-decay Adam under a cosine learning-rate
decay. Batches are age-bin balanced, and the checkpoint returned is the one
with the lowest validation MAE seen during the run.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .binning import balanced_batches, bin_groups, make_bins
from .data import TrainingSample, load_samples, read_ages
from .errors import ConfigError, DataError, UsageError
from .model import AgeRegressor
from .schedule import cosine_lr


@dataclass(frozen=True)
class TrainConfig:
    """Defaults target desk-scale phantom runs; full-size brain runs use
    epochs=300 and batch_size=16 with the same rates."""

    epochs: int = 30
    batch_size: int = 8
    lr_init: float = 1e-4
    lr_final: float = 1e-5
    dropout: float = 0.30
    bin_width_years: float = 5.0
    seed: int = 0
    val_fraction: float = 0.2
    weight_decay: float = 1e-2
    stem_channels: int = 16
    growth: int = 8
    layers_per_block: int = 4

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not 0.0 < self.lr_final <= self.lr_init:
            raise ConfigError(f"need 0 < lr_final <= lr_init, got "
                              f"{self.lr_final} / {self.lr_init}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.bin_width_years <= 0:
            raise ConfigError("bin_width_years must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")


def config_from_dict(doc: dict) -> TrainConfig:
    unknown = set(doc) - set(TrainConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return TrainConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_train_config(path) -> TrainConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return config_from_dict(doc)


@dataclass
class TrainResult:
    state_dict: dict
    best_val_mae: float
    best_epoch: int
    log: list[dict] = field(repr=False)
    input_dims: tuple[int, int, int]
    config: TrainConfig


def _batch_tensors(samples, indices):
    volumes = np.stack([samples[i].volume for i in indices])
    ages = np.array([samples[i].y_c for i in indices], dtype=np.float32)
    return torch.from_numpy(volumes).unsqueeze(1), torch.from_numpy(ages)


def _build_model(cfg: TrainConfig) -> AgeRegressor:
    return AgeRegressor(stem_channels=cfg.stem_channels, growth=cfg.growth,
                        layers_per_block=cfg.layers_per_block,
                        dropout=cfg.dropout)


def evaluate(model, samples, batch_size: int = 8) -> float:
    """Mean absolute error over `samples` with the model in eval mode."""
    samples = list(samples)
    if not samples:
        raise UsageError("evaluate needs at least one sample")
    model.eval()
    errors = []
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            idx = range(start, min(start + batch_size, len(samples)))
            x, y = _batch_tensors(samples, idx)
            errors.append(torch.abs(model(x) - y))
    return float(torch.cat(errors).mean())


def train(train_samples, val_samples, cfg: TrainConfig) -> TrainResult:
    train_samples = list(train_samples)
    val_samples = list(val_samples)
    if len(train_samples) < 2:
        raise UsageError(f"need >= 2 training samples, got {len(train_samples)}")
    if not val_samples:
        raise UsageError("need >= 1 validation sample")
    dims = {s.volume.shape for s in train_samples + val_samples}
    if len(dims) != 1:
        raise UsageError(f"mixed volume shapes {sorted(dims)}")
    input_dims = dims.pop()

    torch.manual_seed(cfg.seed)
    model = _build_model(cfg)
    ages = np.array([s.y_c for s in train_samples])
    model.calibrate_output(float(ages.mean()), max(float(ages.std()), 1.0))
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.lr_init,
                                  weight_decay=cfg.weight_decay)

    groups = bin_groups(make_bins([s.y_c for s in train_samples],
                                  cfg.bin_width_years))
    batches = balanced_batches(groups, cfg.batch_size,
                               np.random.default_rng(cfg.seed))
    steps_per_epoch = math.ceil(len(train_samples) / cfg.batch_size)

    log: list[dict] = []
    best_val = math.inf
    best_epoch = -1
    best_state = None
    for epoch in range(cfg.epochs):
        lr = cosine_lr(epoch, cfg.epochs, cfg.lr_init, cfg.lr_final)
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        losses = []
        for step in range(steps_per_epoch):
            x, y = _batch_tensors(train_samples, next(batches))
            loss = F.l1_loss(model(x), y)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise DataError(f"training diverged: loss {value} at "
                                f"epoch {epoch} step {step}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(value)
        val_mae = evaluate(model, val_samples, cfg.batch_size)
        log.append({"epoch": epoch, "train_loss": float(np.mean(losses)),
                    "val_mae": val_mae, "lr": lr})
        if val_mae < best_val:
            best_val = val_mae
            best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
    return TrainResult(best_state, best_val, best_epoch, log,
                       tuple(input_dims), cfg)


def save_checkpoint(path, result: TrainResult):
    torch.save({
        "format": "agetrain-checkpoint-v1",
        "state_dict": result.state_dict,
        "best_val_mae": result.best_val_mae,
        "best_epoch": result.best_epoch,
        "log": result.log,
        "input_dims": list(result.input_dims),
        "config": asdict(result.config),
    }, path)


def load_checkpoint(path) -> dict:
    try:
        ckpt = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ConfigError(f"cannot load checkpoint {path}: {exc}") from exc
    if not isinstance(ckpt, dict) or ckpt.get("format") != "agetrain-checkpoint-v1":
        raise ConfigError(f"{path} is not an agetrain checkpoint")
    return ckpt


def model_from_checkpoint(ckpt: dict) -> AgeRegressor:
    cfg = config_from_dict(ckpt["config"])
    model = _build_model(cfg)
    model.load_state_dict(ckpt["state_dict"])
    model.eval()
    return model


def predict_to_csv(ckpt_path, data_dir, out_csv) -> int:
    """Predict every volume in `data_dir` and write subject_id,y_true,y_pred.

    True ages come from an `ages.csv` inside the data directory, the same
    file layout the phantom generator produces.
    """
    ckpt = load_checkpoint(ckpt_path)
    model = model_from_checkpoint(ckpt)
    data_dir = Path(data_dir)
    ages_path = data_dir / "ages.csv"
    if not ages_path.exists():
        raise UsageError(f"{data_dir} has no ages.csv to supply true ages")
    samples = load_samples(data_dir, read_ages(ages_path))
    expected = tuple(ckpt["input_dims"])
    for s in samples:
        if s.volume.shape != expected:
            raise UsageError(f"{s.name}: shape {s.volume.shape} does not match "
                             f"checkpoint input {expected}")
    model.eval()
    with open(out_csv, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["subject_id", "y_true", "y_pred"])
        with torch.no_grad():
            for start in range(0, len(samples), 8):
                chunk = samples[start:start + 8]
                x, _ = _batch_tensors(chunk, range(len(chunk)))
                preds = model(x)
                for s, p in zip(chunk, preds):
                    writer.writerow([s.name, f"{s.y_c:.6f}", f"{float(p):.6f}"])
    return len(samples)


def train_from_dir(data_dir, ages_csv, cfg: TrainConfig) -> TrainResult:
    from .data import split_train_val
    samples = load_samples(data_dir, read_ages(ages_csv))
    train_set, val_set = split_train_val(samples, cfg.val_fraction, cfg.seed)
    return train(train_set, val_set, cfg)


def grad_check(model, volume: np.ndarray, y_true: float, n_params: int = 20,
               step: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between autograd and central-difference gradients.

    Runs in float64 on a copy so the finite-difference quotient is not
    drowned by single-precision rounding. The default step balances
    truncation against roundoff for losses of a few tens of years; larger
    steps start crossing relu kinks, which poisons the central difference.
    The loss must not sit exactly on the |.| kink; resample the input if it
    does.
    """
    model = copy.deepcopy(model).double().eval()
    x = torch.from_numpy(volume.astype(np.float64)).unsqueeze(0).unsqueeze(0)
    y = torch.tensor([float(y_true)], dtype=torch.float64)

    def loss_value() -> torch.Tensor:
        return F.l1_loss(model(x), y)

    loss = loss_value()
    if float(loss.detach()) == 0.0:
        raise UsageError("loss is exactly 0 (non-differentiable); resample")
    model.zero_grad()
    loss.backward()

    params = [p for p in model.parameters() if p.grad is not None]
    sizes = [p.numel() for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(total, size=min(n_params, total), replace=False)

    worst = 0.0
    with torch.no_grad():
        for flat_index in chosen:
            i = 0
            while flat_index >= sizes[i]:
                flat_index -= sizes[i]
                i += 1
            p = params[i].view(-1)
            analytic = float(params[i].grad.view(-1)[flat_index])
            original = float(p[flat_index])
            p[flat_index] = original + step
            hi = float(loss_value())
            p[flat_index] = original - step
            lo = float(loss_value())
            p[flat_index] = original
            numeric = (hi - lo) / (2.0 * step)
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
