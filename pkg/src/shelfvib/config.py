"""Run configuration: defaults, strict JSON loading, and object builders.

Every key is optional in a config file; missing keys take the defaults
below and unknown keys are rejected. ``--config default`` uses the
defaults unchanged.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .plate import GRAVITY, PlateModel, PointLoad, SensorPosition
from .simulator import ImpulseTrainSpec, SimulationSetup

SHELF_LENGTH_M = 0.9144
SHELF_WIDTH_M = 0.4672
LOCATION_SPACING_M = 0.1524


class ConfigError(ValueError):
    pass


@dataclass
class PlateSection:
    length_a: float = SHELF_LENGTH_M
    width_b: float = SHELF_WIDTH_M
    flexural_rigidity_D: float = 50.0
    areal_density_rho: float = 10.0
    poisson_nu: float = 0.3
    modal_damping_zeta: float = 0.02
    gravity_g: float = GRAVITY
    mass_coupling: str = "printed"


def _default_locations():
    # four item spots on one line, 15.24 cm apart, centred on the shelf length
    x0 = SHELF_LENGTH_M / 2 - 1.5 * LOCATION_SPACING_M
    return [[round(x0 + i * LOCATION_SPACING_M, 6), 0.30] for i in range(4)]


@dataclass
class GeometrySection:
    source: list = field(default_factory=lambda: [0.80, 0.10])
    # middle of the right, front and left edges, 5 cm inboard
    sensors: list = field(
        default_factory=lambda: [[0.8644, 0.2336], [0.4572, 0.05], [0.05, 0.2336]]
    )
    locations: list = field(default_factory=_default_locations)


@dataclass
class DatasetSection:
    weights_g: list = field(default_factory=lambda: [50.0 * k for k in range(1, 11)])
    samples_per_class: int = 28
    noise_snr_db: Optional[float] = 30.0
    sampling_rate_hz: float = 51200.0
    truncation: list = field(default_factory=lambda: [20, 20])


@dataclass
class ImpulseSection:
    central_frequency: float = 10.0
    period_s: float = 2.0
    amplitude: float = 1.0
    count: int = 1
    sinc_half_width_s: float = 0.5
    taper_s: float = 0.01


@dataclass
class PipelineSection:
    band_lo_hz: int = 50
    band_hi_hz: int = 240
    window_s: float = 1.0
    pre_trigger_s: float = 0.1
    threshold_factor: float = 5.0
    refractory_s: float = 1.5


@dataclass
class EstimatorSection:
    variance_target: float = 0.95
    ridge_lambda: float = 0.1
    train_classes_g: list = field(default_factory=lambda: [50.0, 300.0, 500.0])
    train_fraction: float = 0.1
    sensors: list = field(default_factory=lambda: [1])


@dataclass
class DenseSection:
    full_load_g: float = 3302.0
    item_g: float = 61.0
    items_removed: int = 5
    box_full_g: float = 660.4
    locations: list = field(
        default_factory=lambda: [[round(SHELF_LENGTH_M * (i + 0.5) / 5, 6), 0.30] for i in range(5)]
    )
    train_classes_g: list = field(default_factory=lambda: [2997.0, 3180.0, 3302.0])
    sensors: list = field(default_factory=lambda: [1, 2, 3])


@dataclass
class StudiesSection:
    seeds: int = 10
    ablation_classes_g: Optional[list] = None
    span_low_g: float = 50.0
    class_sets_g: list = field(
        default_factory=lambda: [[50.0, 500.0], [50.0, 300.0, 500.0], [50.0, 200.0, 350.0, 500.0]]
    )
    fractions: list = field(default_factory=lambda: [0.1, 0.25, 0.5, 0.75, 1.0])
    sensor_sets: list = field(default_factory=lambda: [[1], [2], [3], [1, 3], [1, 2, 3]])
    dense: DenseSection = field(default_factory=DenseSection)


@dataclass
class RunConfig:
    plate: PlateSection = field(default_factory=PlateSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    impulse: ImpulseSection = field(default_factory=ImpulseSection)
    pipeline: PipelineSection = field(default_factory=PipelineSection)
    estimator: EstimatorSection = field(default_factory=EstimatorSection)
    studies: StudiesSection = field(default_factory=StudiesSection)
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # -- builders ---------------------------------------------------------

    def plate_model(self) -> PlateModel:
        return PlateModel(**dataclasses.asdict(self.plate))

    def impulse_train(self) -> ImpulseTrainSpec:
        return ImpulseTrainSpec(**dataclasses.asdict(self.impulse))

    def sensor_positions(self) -> tuple:
        return tuple(SensorPosition(float(x), float(y)) for x, y in self.geometry.sensors)

    def setup(self) -> SimulationSetup:
        return SimulationSetup(
            self.plate_model(),
            tuple(float(v) for v in self.geometry.source),
            self.sensor_positions(),
            self.impulse_train(),
            float(self.dataset.sampling_rate_hz),
            tuple(int(v) for v in self.dataset.truncation),
        )

    def locations(self) -> list:
        return [(float(x), float(y)) for x, y in self.geometry.locations]

    def validate(self) -> "RunConfig":
        p = self.pipeline
        if (p.band_lo_hz, p.band_hi_hz, p.window_s) != (50, 240, 1.0):
            raise ConfigError("the feature contract fixes the band at 50-240 Hz and the window at 1.0 s")
        if not self.dataset.weights_g or not self.geometry.locations:
            raise ConfigError("weights_g and locations must be nonempty")
        n_sensors = len(self.geometry.sensors)
        for subset in [self.estimator.sensors, self.studies.dense.sensors, *self.studies.sensor_sets]:
            if not subset or any(not 1 <= int(s) <= n_sensors for s in subset):
                raise ConfigError(f"sensor subset {subset} refers to sensors outside 1..{n_sensors}")
        ladder = {float(w) for w in self.dataset.weights_g}
        st = self.studies
        for name, classes in [
            ("estimator.train_classes_g", self.estimator.train_classes_g),
            ("studies.class_sets_g", [c for cs in st.class_sets_g for c in cs]),
            ("studies.span_low_g", [st.span_low_g]),
            ("studies.ablation_classes_g", st.ablation_classes_g or []),
        ]:
            off = sorted({float(c) for c in classes} - ladder)
            if off:
                raise ConfigError(f"{name} uses weights {off} that are not in dataset.weights_g")
        if not self.studies.seeds >= 1:
            raise ConfigError("studies.seeds must be >= 1")
        try:
            setup = self.setup()
            setup.validate()
            for x, y in self.locations():
                PointLoad(0.0, x, y).validate(setup.plate)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self


def _merge(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f" in {path}" if path else ""
        raise ConfigError(f"unknown config key(s){where}: {', '.join(unknown)}")
    obj = cls()
    for name, value in data.items():
        current = getattr(obj, name)
        if dataclasses.is_dataclass(current):
            setattr(obj, name, _merge(type(current), value, f"{path}.{name}" if path else name))
        else:
            setattr(obj, name, value)
    return obj


def config_from_dict(data: dict) -> RunConfig:
    return _merge(RunConfig, data, "").validate()


def load_config(spec: Optional[str]) -> RunConfig:
    """``None`` or ``"default"`` gives the defaults; otherwise a JSON file path."""
    if spec is None or spec == "default":
        return RunConfig().validate()
    path = Path(spec)
    if not path.is_file():
        raise FileNotFoundError(f"config file {spec} not found")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{spec}: invalid JSON ({exc})") from None
    return config_from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2) + "\n"
