"""Domain-randomized synthetic MRI generation from brain-tissue label maps."""

from .config import GeneratorConfig, OutputConfig, config_from_dict, load_config
from .corrupt import (
    BiasFieldConfig,
    GammaConfig,
    ResolutionConfig,
    apply_bias,
    gamma_transform,
    sample_bias_field,
    sample_gamma,
    sample_resolution,
    simulate_resolution,
)
from .gmm import (
    GaussianPriorSet,
    LabelParams,
    LabelPriorParams,
    UniformPrior,
    estimate_priors,
    sample_params_gaussian,
    sample_params_uniform,
    synthesize,
)
from .metrics import (
    AggregateResult,
    PredictionRecord,
    TestSetResult,
    aggregate,
    brain_pad,
    mae,
    pearson,
    read_predictions,
    summarize,
)
from .phantom import PhantomSpec, make_cohort, make_phantom, sample_ages
from .pipeline import (
    bench,
    generate,
    iter_stream,
    preprocess_for_training,
    run_batch,
)
from .rigid import (
    IDENTITY,
    RigidSamplingConfig,
    RigidTransform3D,
    apply_rigid_labels,
    sample_rigid,
)
from .seeding import STAGES, SampleSeed, derive_seed, stage_rng
from .volume import (
    GridMeta,
    IntensityVolume,
    LabelVolume,
    crop_or_pad,
    load_volume,
    resample,
    rescale_01,
    save_volume,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "BiasFieldConfig",
    "GammaConfig",
    "GaussianPriorSet",
    "GeneratorConfig",
    "GridMeta",
    "IDENTITY",
    "IntensityVolume",
    "LabelParams",
    "LabelPriorParams",
    "LabelVolume",
    "OutputConfig",
    "PhantomSpec",
    "PredictionRecord",
    "ResolutionConfig",
    "RigidSamplingConfig",
    "RigidTransform3D",
    "STAGES",
    "SampleSeed",
    "TestSetResult",
    "UniformPrior",
    "aggregate",
    "apply_bias",
    "apply_rigid_labels",
    "bench",
    "brain_pad",
    "config_from_dict",
    "crop_or_pad",
    "derive_seed",
    "estimate_priors",
    "gamma_transform",
    "generate",
    "iter_stream",
    "load_config",
    "load_volume",
    "mae",
    "make_cohort",
    "make_phantom",
    "pearson",
    "preprocess_for_training",
    "read_predictions",
    "resample",
    "rescale_01",
    "run_batch",
    "sample_ages",
    "sample_bias_field",
    "sample_gamma",
    "sample_params_gaussian",
    "sample_params_uniform",
    "sample_resolution",
    "sample_rigid",
    "save_volume",
    "simulate_resolution",
    "stage_rng",
    "summarize",
    "synthesize",
    "__version__",
]
