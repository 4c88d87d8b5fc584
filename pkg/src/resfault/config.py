"""Run configuration: defaults for every pipeline constant, YAML overrides.

An empty config file yields the full default configuration. Unknown keys
are rejected so typos never silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigInvalid, UnknownKey

STATS_ON_VALIDATION = "validation"
STATS_ON_TRAIN_VALIDATION = "train+validation"


DOWNSAMPLE_FIRST = "downsample_first"
CRUISE_FIRST = "cruise_first"


@dataclass(frozen=True)
class PreprocessSettings:
    downsample_factor: int = 10
    cruise_threshold: float = 0.85
    order: str = DOWNSAMPLE_FIRST

    def validate(self):
        if self.downsample_factor < 1:
            raise ConfigInvalid("preprocess.downsample_factor must be >= 1")
        if not 0.0 < self.cruise_threshold < 1.0:
            raise ConfigInvalid("preprocess.cruise_threshold must lie in (0, 1)")
        if self.order not in (DOWNSAMPLE_FIRST, CRUISE_FIRST):
            raise ConfigInvalid(
                f"preprocess.order must be {DOWNSAMPLE_FIRST!r} or {CRUISE_FIRST!r}"
            )


@dataclass(frozen=True)
class SplitSettings:
    healthy_cycles: int = 16
    validation_fraction: float = 0.15

    def validate(self):
        if self.healthy_cycles < 1:
            raise ConfigInvalid("split.healthy_cycles must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigInvalid("split.validation_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class TrainingSettings:
    epochs: int = 70
    batch_size: int = 64
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    patience: int = 10
    realisations: int = 5

    def validate(self):
        if self.epochs < 1:
            raise ConfigInvalid("training.epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigInvalid("training.batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigInvalid("training.learning_rate must be positive")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ConfigInvalid("training.beta1/beta2 must lie in [0, 1)")
        if self.patience < 0:
            raise ConfigInvalid("training.patience must be >= 0")
        if self.realisations < 1:
            raise ConfigInvalid("training.realisations must be >= 1")


@dataclass(frozen=True)
class DetectionSettings:
    n_wait: int = 3
    stats_source: str = STATS_ON_VALIDATION

    def validate(self):
        if self.n_wait < 1:
            raise ConfigInvalid("detection.n_wait must be >= 1")
        if self.stats_source not in (STATS_ON_VALIDATION, STATS_ON_TRAIN_VALIDATION):
            raise ConfigInvalid(
                "detection.stats_source must be "
                f"{STATS_ON_VALIDATION!r} or {STATS_ON_TRAIN_VALIDATION!r}"
            )


@dataclass(frozen=True)
class SegmentationSettings:
    snapshot_offset: int = 10
    k_max: int = 34
    timeline_checkpoints: tuple[int, ...] = (10, 20, 30, 40)
    normalization: str = "max"

    def validate(self):
        if self.snapshot_offset < 0:
            raise ConfigInvalid("segmentation.snapshot_offset must be >= 0")
        if self.k_max < 0:
            raise ConfigInvalid("segmentation.k_max must be >= 0")
        if any(c < 0 for c in self.timeline_checkpoints):
            raise ConfigInvalid("segmentation.timeline_checkpoints must be >= 0")
        if self.normalization not in ("max", "zscore"):
            raise ConfigInvalid("segmentation.normalization must be 'max' or 'zscore'")


@dataclass(frozen=True)
class SynthSettings:
    n_units: int = 10
    n_families: int = 3
    cycles_per_unit: int = 48
    rows_per_cycle: int = 200
    fault_start_lo: int = 18
    fault_start_hi: int = 22
    noise_std: float = 0.05
    severity_scale: float | None = None
    severity_exponent: float = 2.0
    map_seed: int | None = None
    unit_prefix: str = ""

    def validate(self):
        if self.n_units < 1:
            raise ConfigInvalid("synth.n_units must be >= 1")
        if not 1 <= self.n_families <= 3:
            raise ConfigInvalid("synth.n_families must lie in 1..3")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    preprocess: PreprocessSettings = field(default_factory=PreprocessSettings)
    split: SplitSettings = field(default_factory=SplitSettings)
    training: TrainingSettings = field(default_factory=TrainingSettings)
    detection: DetectionSettings = field(default_factory=DetectionSettings)
    segmentation: SegmentationSettings = field(default_factory=SegmentationSettings)
    synth: SynthSettings = field(default_factory=SynthSettings)

    def validate(self) -> "RunConfig":
        for section in (
            self.preprocess,
            self.split,
            self.training,
            self.detection,
            self.segmentation,
            self.synth,
        ):
            section.validate()
        return self


_SECTION_TYPES = {
    "preprocess": PreprocessSettings,
    "split": SplitSettings,
    "training": TrainingSettings,
    "detection": DetectionSettings,
    "segmentation": SegmentationSettings,
    "synth": SynthSettings,
}


def _coerce(section: str, fld: dataclasses.Field, value):
    name = f"{section}.{fld.name}"
    ftype = str(fld.type)
    if value is None:
        if "None" in ftype:
            return None
        raise ConfigInvalid(f"{name} must not be null")
    if ftype.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigInvalid(f"{name} must be an integer, got {value!r}")
        return value
    if ftype.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigInvalid(f"{name} must be a number, got {value!r}")
        return float(value)
    if ftype.startswith("str"):
        if not isinstance(value, str):
            raise ConfigInvalid(f"{name} must be a string, got {value!r}")
        return value
    if ftype.startswith("tuple"):
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ConfigInvalid(f"{name} must be a list of integers, got {value!r}")
        return tuple(value)
    raise ConfigInvalid(f"{name}: unsupported field type {ftype!r}")


def _build_section(section_name: str, cls, blob) -> object:
    if blob is None:
        blob = {}
    if not isinstance(blob, dict):
        raise ConfigInvalid(f"section {section_name!r} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(blob) - set(known)
    if unknown:
        raise UnknownKey(f"unknown key(s) in {section_name!r}: {sorted(unknown)}")
    kwargs = {
        key: _coerce(section_name, known[key], value) for key, value in blob.items()
    }
    return cls(**kwargs)


def config_from_dict(blob: dict | None) -> RunConfig:
    """Build a validated RunConfig from a nested plain dict."""
    if blob is None:
        blob = {}
    if not isinstance(blob, dict):
        raise ConfigInvalid("config must be a mapping of sections")
    unknown = set(blob) - set(_SECTION_TYPES) - {"seed"}
    if unknown:
        raise UnknownKey(f"unknown top-level key(s): {sorted(unknown)}")
    seed = blob.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigInvalid(f"seed must be an integer, got {seed!r}")
    sections = {
        name: _build_section(name, cls, blob.get(name))
        for name, cls in _SECTION_TYPES.items()
    }
    return RunConfig(seed=seed, **sections).validate()


def load_config(path: str | Path | None) -> RunConfig:
    """Load a YAML config file; an empty or absent file means all defaults."""
    if path is None:
        return RunConfig().validate()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config file: {exc}") from None
    try:
        blob = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"invalid YAML in {path}: {exc}") from None
    return config_from_dict(blob)


def dump_config(cfg: RunConfig) -> str:
    """Render a config back to YAML (used by run manifests)."""
    blob = dataclasses.asdict(cfg)
    for section in blob.values():
        if isinstance(section, dict):
            for key, value in section.items():
                if isinstance(value, tuple):
                    section[key] = list(value)
    return yaml.safe_dump(blob, sort_keys=True)
