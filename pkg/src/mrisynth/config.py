"""Generator configuration: defaults, validation, strict JSON loading.

Unknown keys anywhere in the document are an error, so a typo like
"amplitdue" fails loudly instead of silently using the default.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .corrupt import BiasFieldConfig, GammaConfig, ResolutionConfig
from .errors import ConfigError, UsageError
from .gmm import UniformPrior
from .rigid import RigidSamplingConfig
from .volume import _triple

PRIOR_MODES = ("uniform", "gaussian")


@dataclass(frozen=True)
class OutputConfig:
    spacing_mm: float = 1.4
    dims: tuple[int, int, int] = (130, 130, 130)

    def __post_init__(self):
        if self.spacing_mm <= 0:
            raise UsageError(f"output spacing_mm must be > 0, got {self.spacing_mm}")
        dims = _triple(self.dims, "output dims", dtype=int)
        if min(dims) < 1:
            raise UsageError(f"output dims must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)


@dataclass(frozen=True)
class GeneratorConfig:
    rigid: RigidSamplingConfig = RigidSamplingConfig()
    prior_mode: str = "uniform"
    uniform_prior: UniformPrior = UniformPrior()
    prior_file: str | None = None
    bias: BiasFieldConfig = BiasFieldConfig()
    gamma: GammaConfig = GammaConfig()
    resolution: ResolutionConfig = ResolutionConfig()
    background_zero_prob: float = 0.2
    master_seed: int = 0
    output: OutputConfig = OutputConfig()

    def __post_init__(self):
        if self.prior_mode not in PRIOR_MODES:
            raise UsageError(f"prior_mode must be one of {PRIOR_MODES}, got {self.prior_mode!r}")
        if self.prior_mode == "gaussian" and not self.prior_file:
            raise UsageError("prior_mode 'gaussian' requires prior_file")
        if not 0 <= self.background_zero_prob <= 1:
            raise UsageError(
                f"background_zero_prob must be in [0, 1], got {self.background_zero_prob}")
        if not 0 <= self.master_seed < 2**64:
            raise UsageError(f"master_seed must fit in 64 bits, got {self.master_seed}")


_SECTIONS = {
    "rigid": RigidSamplingConfig,
    "uniform_prior": UniformPrior,
    "bias": BiasFieldConfig,
    "gamma": GammaConfig,
    "resolution": ResolutionConfig,
    "output": OutputConfig,
}


def _build_section(cls, doc: dict, where: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object, got {type(doc).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**doc)


def config_from_dict(doc: dict) -> GeneratorConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"config root: expected an object, got {type(doc).__name__}")
    known = {f.name for f in dataclasses.fields(GeneratorConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"config root: unknown keys {sorted(unknown)}")
    kwargs = {}
    try:
        for key, value in doc.items():
            if key in _SECTIONS:
                kwargs[key] = _build_section(_SECTIONS[key], value, key)
            else:
                kwargs[key] = value
        return GeneratorConfig(**kwargs)
    except (UsageError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def config_to_dict(cfg: GeneratorConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    for key in ("rigid", "uniform_prior", "bias", "gamma", "resolution", "output"):
        doc[key] = {k: list(v) if isinstance(v, tuple) else v
                    for k, v in doc[key].items()}
    return doc


def load_config(path) -> GeneratorConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(doc)
