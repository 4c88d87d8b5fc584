"""Synthetic fleet generator with known fault ground truth.

Each unit flies repeated climb-cruise-descent cycles. Sensor readings are
a fixed smooth nonlinear map of the operating descriptors, shared across
the whole fleet, plus Gaussian noise. After a unit's fault-initiation
cycle, an accelerating drift is added to that fault family's sensors.
The drift scale is calibrated in units of the sensor noise so detection
difficulty is controlled directly.

The generator is a test oracle, not an engine model: magnitudes are
plausible but carry no thermodynamic meaning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_model import DEFAULT_W_CHANNELS, DEFAULT_X_CHANNELS, UnitSeries
from .errors import ConfigInvalid

ALTITUDE_CEILING = 35000.0

SEGMENT_CLIMB = 0
SEGMENT_CRUISE = 1
SEGMENT_DESCENT = 2

# Fractions of each cycle spent per phase; the cruise plateau must stay
# dominant so the cruise filter keeps enough rows after downsampling.
CLIMB_FRACTION = 0.18
DESCENT_FRACTION = 0.15

# Calibration targets: the fastest-drifting sensor reaches
# DRIFT_TARGET_SIGMA * noise_std this many cycles after fault initiation.
DRIFT_TARGET_SIGMA = 6.0
DRIFT_TARGET_CYCLES = 10

_MAP_HIDDEN = 6
_MAP_CALIBRATION_CYCLES = 30
_MAP_SEED_TAG = 917


@dataclass(frozen=True)
class FamilyFault:
    """One fault family: which sensors drift, how fast, and when.

    ``rate_multipliers`` scale the drift per sensor (1.0 = full rate) and
    ``onset_offsets`` delay each sensor's drift start, in cycles after the
    unit's fault-initiation cycle.
    """

    name: str
    sensors: tuple[str, ...]
    rate_multipliers: tuple[float, ...] = ()
    onset_offsets: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.sensors:
            raise ConfigInvalid(f"family {self.name!r} must list at least one sensor")
        unknown = set(self.sensors) - set(DEFAULT_X_CHANNELS)
        if unknown:
            raise ConfigInvalid(f"family {self.name!r}: unknown sensors {sorted(unknown)}")
        if not self.rate_multipliers:
            object.__setattr__(
                self,
                "rate_multipliers",
                tuple(1.0 / (1.8**i) for i in range(len(self.sensors))),
            )
        if not self.onset_offsets:
            object.__setattr__(self, "onset_offsets", (0,) * len(self.sensors))
        if len(self.rate_multipliers) != len(self.sensors):
            raise ConfigInvalid("one rate multiplier per sensor required")
        if len(self.onset_offsets) != len(self.sensors):
            raise ConfigInvalid("one onset offset per sensor required")


DEFAULT_FAMILIES = (
    FamilyFault(name="fan", sensors=("P2", "P21", "P15", "Nf")),
    FamilyFault(name="hpc", sensors=("T30", "Ps30", "Nc")),
    FamilyFault(name="lpt", sensors=("T48", "T50", "P50")),
)


@dataclass(frozen=True)
class SynthConfig:
    """Fleet layout, flight-profile sizing, fault timing, and drift severity.

    ``severity_scale`` is the drift added per (cycle - fault cycle) **
    ``severity_exponent``, in raw sensor units (sensor signals have unit
    variance over the operating envelope). None auto-calibrates it so the
    fastest sensor reaches 6 * noise_std ten cycles after fault
    initiation; 0 disables faults entirely (healthy fleet).

    ``map_seed`` pins the fleet-wide sensor response map independently of
    ``seed`` so a second fleet (e.g. healthy hold-out units) can share the
    first fleet's physics while drawing fresh flight profiles;
    ``unit_prefix`` keeps such a fleet's unit ids distinct.
    """

    n_units: int = 10
    families: tuple[FamilyFault, ...] = DEFAULT_FAMILIES
    cycles_per_unit: int = 48
    rows_per_cycle: int = 200
    fault_start_cycle: int | tuple[int, int] = (18, 22)
    severity_scale: float | None = None
    severity_exponent: float = 2.0
    noise_std: float = 0.05
    healthy_cycles_per_unit: int = 16
    seed: int = 0
    map_seed: int | None = None
    unit_prefix: str = ""

    def __post_init__(self):
        if self.n_units < 1:
            raise ConfigInvalid("n_units must be >= 1")
        if not self.families:
            raise ConfigInvalid("at least one fault family required")
        sensor_sets = [frozenset(f.sensors) for f in self.families]
        if len(set(sensor_sets)) != len(sensor_sets):
            raise ConfigInvalid("fault sensor sets must be pairwise distinct")
        if self.cycles_per_unit < 2:
            raise ConfigInvalid("cycles_per_unit must be >= 2")
        if self.rows_per_cycle < 20:
            raise ConfigInvalid("rows_per_cycle must be >= 20")
        lo, hi = self.fault_start_range()
        if lo > hi:
            raise ConfigInvalid("fault_start_cycle range must be non-decreasing")
        if lo <= self.healthy_cycles_per_unit:
            raise ConfigInvalid(
                "faults must start after the healthy window "
                f"({lo} <= {self.healthy_cycles_per_unit})"
            )
        if hi >= self.cycles_per_unit:
            raise ConfigInvalid("faults must start before the unit ends")
        if self.noise_std < 0:
            raise ConfigInvalid("noise_std must be >= 0")
        if self.severity_exponent <= 0:
            raise ConfigInvalid("severity_exponent must be positive")
        if self.severity_scale is not None and self.severity_scale < 0:
            raise ConfigInvalid("severity_scale must be >= 0")

    def fault_start_range(self) -> tuple[int, int]:
        if isinstance(self.fault_start_cycle, int):
            return self.fault_start_cycle, self.fault_start_cycle
        lo, hi = self.fault_start_cycle
        return int(lo), int(hi)

    def effective_scale(self) -> float:
        if self.severity_scale is not None:
            return self.severity_scale
        return (
            DRIFT_TARGET_SIGMA
            * self.noise_std
            / DRIFT_TARGET_CYCLES**self.severity_exponent
        )

    def effective_map_seed(self) -> int:
        return self.seed if self.map_seed is None else self.map_seed


@dataclass(frozen=True)
class GroundTruth:
    """Evaluation-only truth for one generated unit."""

    unit_id: str
    family: str
    fault_cycle: int | None
    fault_sensors: tuple[str, ...]
    segment_of: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SensorMap:
    """Fleet-wide smooth map from normalized descriptors to sensor readings."""

    mix: np.ndarray
    offset: np.ndarray
    readout: np.ndarray
    out_mean: np.ndarray
    out_std: np.ndarray

    def apply(self, w_rows: np.ndarray) -> np.ndarray:
        hidden = np.tanh(_normalize_w(w_rows) @ self.mix.T + self.offset)
        raw = hidden @ self.readout.T
        return (raw - self.out_mean) / self.out_std


def _normalize_w(w_rows: np.ndarray) -> np.ndarray:
    alt, mach, tra, t2 = (w_rows[:, i] for i in range(4))
    return np.column_stack(
        [alt / ALTITUDE_CEILING, mach, tra / 100.0, (t2 - 420.0) / 100.0]
    )


def _cycle_profile(rng: np.random.Generator, rows: int) -> tuple[np.ndarray, np.ndarray]:
    """One cycle of descriptor rows plus per-row segment labels."""
    n_climb = max(2, round(CLIMB_FRACTION * rows))
    n_desc = max(2, round(DESCENT_FRACTION * rows))
    n_cruise = rows - n_climb - n_desc
    alt_top = rng.uniform(0.8, 1.0) * ALTITUDE_CEILING
    # climb tops out at 0.80 of the plateau so the cruise filter's 0.85
    # normalized-altitude cut separates the phases exactly
    climb = np.linspace(0.05, 0.80, n_climb) * alt_top
    cruise = alt_top * rng.uniform(0.97, 1.0, size=n_cruise)
    descent = np.linspace(0.80, 0.05, n_desc) * alt_top
    alt = np.concatenate([climb, cruise, descent])
    segments = np.concatenate(
        [
            np.full(n_climb, SEGMENT_CLIMB, dtype=np.int8),
            np.full(n_cruise, SEGMENT_CRUISE, dtype=np.int8),
            np.full(n_desc, SEGMENT_DESCENT, dtype=np.int8),
        ]
    )
    rel = alt / ALTITUDE_CEILING
    mach = 0.30 + 0.48 * rel + rng.normal(0.0, 0.01, size=rows)
    tra = (
        35.0
        + 40.0 * rel
        + 18.0 * (segments == SEGMENT_CLIMB)
        + rng.normal(0.0, 1.0, size=rows)
    )
    t2 = 518.67 - 3.0e-3 * alt + 8.0 * mach**2 + rng.normal(0.0, 0.5, size=rows)
    return np.column_stack([alt, mach, tra, t2]), segments


def build_sensor_map(seed: int) -> SensorMap:
    """Construct the shared response map, normalized to unit signal variance."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _MAP_SEED_TAG]))
    n_w = len(DEFAULT_W_CHANNELS)
    n_x = len(DEFAULT_X_CHANNELS)
    mix = rng.uniform(-2.0, 2.0, size=(_MAP_HIDDEN, n_w))
    offset = rng.uniform(-1.0, 1.0, size=_MAP_HIDDEN)
    readout = rng.normal(0.0, 1.0, size=(n_x, _MAP_HIDDEN))
    reference = np.vstack(
        [_cycle_profile(rng, 150)[0] for _ in range(_MAP_CALIBRATION_CYCLES)]
    )
    hidden = np.tanh(_normalize_w(reference) @ mix.T + offset)
    raw = hidden @ readout.T
    std = raw.std(axis=0)
    std[std < 1e-12] = 1.0
    return SensorMap(
        mix=mix, offset=offset, readout=readout, out_mean=raw.mean(axis=0), out_std=std
    )


def derive_unit_seed(master_seed: int, family_index: int, unit_index: int) -> int:
    seq = np.random.SeedSequence([master_seed, family_index, unit_index])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def gen_unit(
    cfg: SynthConfig,
    family: FamilyFault,
    unit_seed: int,
    unit_id: str = "u00",
) -> tuple[UnitSeries, GroundTruth]:
    """Generate one unit plus its ground truth.

    The drift component is deterministic given the cycle index, so
    regenerating with the same seed and a zero severity scale yields the
    identical series minus the injected drift.
    """
    rng = np.random.default_rng(unit_seed)
    sensor_map = build_sensor_map(cfg.effective_map_seed())
    scale = cfg.effective_scale()
    lo, hi = cfg.fault_start_range()
    n_true = int(rng.integers(lo, hi + 1))
    healthy = scale == 0.0

    sensor_idx = {name: i for i, name in enumerate(DEFAULT_X_CHANNELS)}
    w_blocks = []
    x_blocks = []
    segment_blocks = []
    cycle_blocks = []
    for cycle in range(cfg.cycles_per_unit):
        w_cycle, segments = _cycle_profile(rng, cfg.rows_per_cycle)
        x_cycle = sensor_map.apply(w_cycle) + rng.normal(
            0.0, cfg.noise_std, size=(cfg.rows_per_cycle, len(DEFAULT_X_CHANNELS))
        )
        if not healthy and cycle > n_true:
            for name, mult, onset in zip(
                family.sensors, family.rate_multipliers, family.onset_offsets
            ):
                growth = cycle - n_true - onset
                if growth > 0:
                    x_cycle[:, sensor_idx[name]] += (
                        mult * scale * growth**cfg.severity_exponent
                    )
        w_blocks.append(w_cycle)
        x_blocks.append(x_cycle)
        segment_blocks.append(segments)
        cycle_blocks.append(np.full(cfg.rows_per_cycle, cycle, dtype=np.int64))

    series = UnitSeries(
        unit_id=unit_id,
        dataset_id=family.name,
        w=np.vstack(w_blocks),
        x=np.vstack(x_blocks),
        cycle_of=np.concatenate(cycle_blocks),
        channel_names=DEFAULT_W_CHANNELS + DEFAULT_X_CHANNELS,
    )
    truth = GroundTruth(
        unit_id=unit_id,
        family=family.name,
        fault_cycle=None if healthy else n_true,
        fault_sensors=() if healthy else tuple(family.sensors),
        segment_of=np.concatenate(segment_blocks),
    )
    return series, truth


def gen_fleet(cfg: SynthConfig) -> list[tuple[UnitSeries, GroundTruth]]:
    """Generate n_families x n_units units with per-unit derived seeds."""
    fleet = []
    for f_idx, family in enumerate(cfg.families):
        for u_idx in range(cfg.n_units):
            unit_id = f"{cfg.unit_prefix}{family.name}-u{u_idx + 1:02d}"
            seed = derive_unit_seed(cfg.seed, f_idx, u_idx)
            fleet.append(gen_unit(cfg, family, seed, unit_id=unit_id))
    return fleet
