"""Experiment configuration: one nested YAML document, hashed canonically."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from rxfault.features import ReductionMode
from rxfault.gridsim import GroundingScheme, SequenceLineParams, SystemModel, default_model
from rxfault.neuralnet import ALGORITHMS, NormalizationSpec
from rxfault.raster import Viewport


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LineConfig:
    length_km: float = 200.0
    z1_ohm_per_km: tuple[float, float] = (0.05, 0.45)
    z0_ohm_per_km: tuple[float, float] = (0.25, 1.35)
    c1_nf_per_km: float = 9.0
    c0_nf_per_km: float = 5.5

    def params(self) -> SequenceLineParams:
        return SequenceLineParams(
            z1_per_km=complex(*self.z1_ohm_per_km),
            z0_per_km=complex(*self.z0_ohm_per_km),
            c1_per_km=self.c1_nf_per_km * 1e-9,
            c0_per_km=self.c0_nf_per_km * 1e-9,
            length_km=self.length_km,
        )


@dataclass(frozen=True)
class SystemConfig:
    f0_hz: float = 50.0
    kv_ll: float = 154.0
    load_mw: float = 25.0
    sc_mva: float = 2000.0
    x_over_r: float = 10.0
    z0_over_z1_src: float = 1.0
    line: LineConfig = field(default_factory=LineConfig)


@dataclass(frozen=True)
class ScenarioConfig:
    schemes: tuple[str, ...] = ("ungrounded", "solid", "impedance")
    impedance_rn_ohm: float = 5.0
    distances_km: tuple[float, ...] = tuple(float(d) for d in range(5, 205, 5))
    test_from_km: float = 175.0
    rf_ohm: float = 1.0
    t_on_s: float = 0.3
    duration_s: float = 0.05


@dataclass(frozen=True)
class RelayConfig:
    fs_hz: float = 3200.0
    dc_offset: bool = True
    current_floor_fraction: float = 0.01


@dataclass(frozen=True)
class RasterConfig:
    r_min: float = -50.0
    r_max: float = 150.0
    x_min: float = -50.0
    x_max: float = 150.0
    increment: int = 32


@dataclass(frozen=True)
class FeatureConfig:
    reductions: tuple[str, ...] = ("per_column", "block8")


@dataclass(frozen=True)
class TrainingConfig:
    hidden: tuple[int, ...] = (20, 18, 10, 5)
    cascade: bool = True
    max_epochs: int = 1000
    goal_mse: float = 1e-5
    learning_rate: float = 0.9
    seed: int = 0


@dataclass(frozen=True)
class SvrConfig:
    reduction: str = "block8"
    folds: int = 5


@dataclass(frozen=True)
class NormalizationConfig:
    x_min: float = 5.0
    x_max: float = 200.0


@dataclass(frozen=True)
class PipelineConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    scenarios: ScenarioConfig = field(default_factory=ScenarioConfig)
    relay: RelayConfig = field(default_factory=RelayConfig)
    raster: RasterConfig = field(default_factory=RasterConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    svr: SvrConfig = field(default_factory=SvrConfig)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)

    def __post_init__(self):
        sc = self.scenarios
        length = self.system.line.length_km
        for d in sc.distances_km:
            if not 0 < d <= length:
                raise ConfigError(
                    f"distance exceeds line length: {d:g} km on a {length:g} km line"
                    if d > length else f"distance must be positive, got {d:g} km"
                )
        if len(set(sc.distances_km)) != len(sc.distances_km):
            raise ConfigError("duplicate fault distances")
        for s in sc.schemes:
            self.grounding(s)
        if not self.train_distances() or not self.test_distances():
            raise ConfigError("split needs at least one train and one test distance")
        for r in self.features.reductions:
            ReductionMode.parse(r)
        if ReductionMode.parse(self.svr.reduction).label not in self.reduction_labels:
            raise ConfigError(f"svr reduction {self.svr.reduction!r} is not generated")
        if self.training.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        self.norm_spec()
        self.viewport()

    # derived objects

    def grounding(self, scheme: str) -> GroundingScheme:
        try:
            return GroundingScheme.parse(scheme, self.scenarios.impedance_rn_ohm)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def system_model(self, scheme: str) -> SystemModel:
        s = self.system
        return default_model(
            self.grounding(scheme),
            line=s.line.params(),
            load_mw=s.load_mw,
            sc_mva=s.sc_mva,
            x_over_r=s.x_over_r,
            z0_over_z1_src=s.z0_over_z1_src,
            f0=s.f0_hz,
            kv_ll=s.kv_ll,
        )

    def norm_spec(self) -> NormalizationSpec:
        return NormalizationSpec(self.normalization.x_min, self.normalization.x_max)

    def viewport(self) -> Viewport:
        r = self.raster
        return Viewport(r.r_min, r.r_max, r.x_min, r.x_max)

    @property
    def reduction_labels(self) -> list[str]:
        return [ReductionMode.parse(r).label for r in self.features.reductions]

    def train_distances(self) -> list[float]:
        return [d for d in self.scenarios.distances_km if d < self.scenarios.test_from_km]

    def test_distances(self) -> list[float]:
        return [d for d in self.scenarios.distances_km if d >= self.scenarios.test_from_km]

    # serialization

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    @classmethod
    def from_dict(cls, data: dict | None) -> PipelineConfig:
        return _build(cls, data or {}, "config")

    @classmethod
    def load(cls, path) -> PipelineConfig:
        data = yaml.safe_load(Path(path).read_text())
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _distances(value, where):
    if isinstance(value, dict):
        try:
            start, stop, step = (float(value[k]) for k in ("start", "stop", "step"))
        except KeyError as exc:
            raise ConfigError(f"{where}: range needs start, stop and step") from exc
        n = int(round((stop - start) / step)) + 1
        return tuple(start + i * step for i in range(n))
    return tuple(float(x) for x in value)


def _coerce(tp, value, where):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        return _build(tp, value, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        args = typing.get_args(tp)
        item = args[0]
        if len(args) != 2 or args[1] is not Ellipsis:
            if len(value) != len(args):
                raise ConfigError(f"{where}: expected {len(args)} items")
        return tuple(_coerce(item, v, where) for v in value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or float(value) != int(value):
            raise ConfigError(f"{where}: expected an integer")
        return int(value)
    if tp is float:
        if isinstance(value, bool):
            raise ConfigError(f"{where}: expected a number")
        try:
            return float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: expected a number") from exc
    if tp is str:
        return str(value)
    raise ConfigError(f"{where}: unsupported type {tp}")


def _build(cls, data: dict, where: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        key = f"{where}.{name}"
        if name == "distances_km":
            kwargs[name] = _distances(value, key)
        else:
            kwargs[name] = _coerce(hints[name], value, key)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def check_trainer(name: str) -> str:
    name = name.lower()
    if name not in ALGORITHMS:
        raise ConfigError(f"unknown trainer {name!r}; choose from {', '.join(ALGORITHMS)}")
    return name
