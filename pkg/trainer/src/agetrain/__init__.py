"""Desk-scale brain-age regression: training, prediction, verification."""

from .binning import balanced_batches, bin_groups, make_bins
from .data import (
    TrainingSample,
    edge_map,
    load_samples,
    read_ages,
    split_train_val,
)
from .model import AgeRegressor, count_parameters
from .nifti import read_volume
from .schedule import cosine_lr
from .train import (
    TrainConfig,
    TrainResult,
    config_from_dict,
    evaluate,
    grad_check,
    load_checkpoint,
    load_train_config,
    model_from_checkpoint,
    predict_to_csv,
    save_checkpoint,
    train,
    train_from_dir,
)

__version__ = "0.1.0"

__all__ = [
    "AgeRegressor",
    "TrainConfig",
    "TrainResult",
    "TrainingSample",
    "balanced_batches",
    "bin_groups",
    "config_from_dict",
    "cosine_lr",
    "count_parameters",
    "edge_map",
    "evaluate",
    "grad_check",
    "load_checkpoint",
    "load_samples",
    "load_train_config",
    "make_bins",
    "model_from_checkpoint",
    "predict_to_csv",
    "read_ages",
    "read_volume",
    "save_checkpoint",
    "split_train_val",
    "train",
    "train_from_dir",
    "__version__",
]
