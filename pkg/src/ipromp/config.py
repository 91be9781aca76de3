"""Experiment configuration: defaults, YAML loading, strict validation.

Every knob of the evaluation pipeline lives here so a single file fully
determines a run. Unknown keys are rejected rather than ignored; silently
dropped typos have burned enough evaluation time elsewhere.
"""
import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError, SchemaError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    n_basis: int = 31
    overlap: float = 1.0
    normalize: bool = True
    ridge: float = 0.0
    jitter: float = 1e-6
    shrinkage: float = 0.05
    train_noise: float = 2.5e-3
    grid_size: int | None = None

    def validate(self):
        if self.n_basis < 1:
            raise ConfigError("model.n_basis must be >= 1")
        if not (self.overlap > 0):
            raise ConfigError("model.overlap must be positive")
        if self.ridge < 0 or self.jitter < 0:
            raise ConfigError("model.ridge and model.jitter must be >= 0")
        if not (0.0 <= self.shrinkage <= 1.0):
            raise ConfigError("model.shrinkage must lie in [0, 1]")
        if not (self.train_noise > 0):
            raise ConfigError("model.train_noise must be positive")
        if self.grid_size is not None and self.grid_size < 2:
            raise ConfigError("model.grid_size must be >= 2")


@dataclass(frozen=True)
class ObservationConfig:
    noise: float = 2.5e-3
    stride: int = 5

    def validate(self):
        if not (self.noise > 0):
            raise ConfigError("observation.noise must be positive")
        if self.stride < 1:
            raise ConfigError("observation.stride must be >= 1")


@dataclass(frozen=True)
class PhaseConfig:
    grid_points: int = 61
    span_sigmas: float = 3.0
    sigma_floor: float = 1e-3
    flat_prior: bool = False

    def validate(self):
        if self.grid_points < 2:
            raise ConfigError("phase.grid_points must be >= 2")
        if self.span_sigmas < 3.0:
            raise ConfigError(
                "phase.span_sigmas must be >= 3 so candidate grids keep "
                "their prior coverage guarantee")
        if not (self.sigma_floor > 0):
            raise ConfigError("phase.sigma_floor must be positive")


@dataclass(frozen=True)
class RecognitionConfig:
    shared_alpha: bool = False
    sequential: bool = True

    def validate(self):
        pass


@dataclass(frozen=True)
class WindowGrids:
    dynamic: tuple = (1.0, 0.5, 0.2, 0.1)
    static: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

    def validate(self):
        if not self.dynamic and not self.static:
            raise ConfigError("at least one window grid must be nonempty")
        for w in self.dynamic:
            if not (w > 0):
                raise ConfigError("dynamic window durations must be positive")
        for r in self.static:
            if not (0.0 < r <= 1.0):
                raise ConfigError("static ratios must lie in (0, 1]")
        if len(set(self.dynamic)) != len(self.dynamic) or \
                len(set(self.static)) != len(self.static):
            raise ConfigError("window grids must not repeat values")


@dataclass(frozen=True)
class BlendConfig:
    gradient: float = 20.0
    grid_points: int = 101

    def validate(self):
        if not (self.gradient > 0):
            raise ConfigError("blending.gradient must be positive")
        if self.grid_points < 2:
            raise ConfigError("blending.grid_points must be >= 2")


@dataclass(frozen=True)
class MetricsConfig:
    weights: tuple = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    kinematics: str = "passthrough"
    link_lengths: tuple | None = None
    joint_error: str = "rms"

    def validate(self):
        if len(self.weights) != 3:
            raise ConfigError("metrics.weights needs exactly 3 entries")
        if any(w < 0 for w in self.weights):
            raise ConfigError("metrics.weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ConfigError("metrics.weights must sum to 1")
        if self.kinematics not in ("passthrough", "planar"):
            raise ConfigError(
                f"unknown metrics.kinematics {self.kinematics!r}")
        if self.kinematics == "planar" and not self.link_lengths:
            raise ConfigError("planar kinematics needs metrics.link_lengths")
        if self.joint_error not in ("rms", "sum"):
            raise ConfigError(f"unknown metrics.joint_error "
                              f"{self.joint_error!r}")


@dataclass(frozen=True)
class PipelineConfig:
    conditioning: str = "cumulative"
    blend_traces: int = 1

    def validate(self):
        if self.conditioning not in ("cumulative", "window"):
            raise ConfigError(
                f"pipeline.conditioning must be 'cumulative' or 'window', "
                f"got {self.conditioning!r}")
        if self.blend_traces < 0:
            raise ConfigError("pipeline.blend_traces must be >= 0")


_GROUPS = {
    "model": ModelConfig,
    "observation": ObservationConfig,
    "phase": PhaseConfig,
    "recognition": RecognitionConfig,
    "windows": WindowGrids,
    "blending": BlendConfig,
    "metrics": MetricsConfig,
    "pipeline": PipelineConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 42
    profile: str = "toy"
    experiments: tuple = ("distinct", "diverging")
    n_demos: int | None = None
    sample_rate: float = 50.0
    nominal_duration: float = 4.0
    model: ModelConfig = field(default_factory=ModelConfig)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    phase: PhaseConfig = field(default_factory=PhaseConfig)
    recognition: RecognitionConfig = field(
        default_factory=RecognitionConfig)
    windows: WindowGrids = field(default_factory=WindowGrids)
    blending: BlendConfig = field(default_factory=BlendConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise SchemaError(
                f"config schema_version {self.schema_version} is not "
                f"supported (expected {SCHEMA_VERSION})")
        if self.profile not in ("toy", "full"):
            raise ConfigError(f"unknown profile {self.profile!r}")
        if not self.experiments:
            raise ConfigError("experiments must not be empty")
        for e in self.experiments:
            if e not in ("distinct", "diverging"):
                raise ConfigError(f"unknown experiment {e!r}")
        if self.n_demos is not None and self.n_demos < 3:
            raise ConfigError("n_demos below 3 cannot support leave-one-out")
        if not (self.sample_rate > 0):
            raise ConfigError("sample_rate must be positive")
        if not (self.nominal_duration > 0):
            raise ConfigError("nominal_duration must be positive")
        for name in _GROUPS:
            getattr(self, name).validate()
        return self

    def resolved_n_demos(self):
        if self.n_demos is not None:
            return self.n_demos
        return 10 if self.profile == "toy" else 20

    def to_dict(self):
        out = dataclasses.asdict(self)
        for key, value in list(out.items()):
            if isinstance(value, tuple):
                out[key] = list(value)
        for name in _GROUPS:
            for key, value in list(out[name].items()):
                if isinstance(value, tuple):
                    out[name][key] = list(value)
        return out


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(
            f"unknown keys under {path}: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    plain = {k: v for k, v in data.items() if k not in _GROUPS}
    cfg = _build(ExperimentConfig, plain, "config")
    overrides = {}
    for name, cls in _GROUPS.items():
        if name in data:
            overrides[name] = _build(cls, data[name], f"config.{name}")
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from None
    if data is None:
        data = {}
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)


def default_config(**overrides) -> ExperimentConfig:
    return dataclasses.replace(ExperimentConfig(), **overrides).validate()
