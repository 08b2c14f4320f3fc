"""Scenario configuration: a YAML key-value tree mapped onto frozen dataclasses.

Blocks mirror the modules (``devices``, ``photonics``, ``wafer``, ``column``,
``layout``, ``system``, ``topology``, ``simulate``, ``fig2a``, ``fig2b``).
Unknown keys are rejected; omitted keys take the module defaults.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass
from typing import Any, Literal, Optional, Union

import yaml

from .devices import SomaSpec, StdpParams, SynapseSpec, TransmitterSpec
from .engine import NeuronParams
from .errors import ConfigError
from .layout import ColumnSpec, DeviceLatency, PodSpec, WaferSpec, wafer_capacity
from .photonics import GroupIndex, LossModel, PowerModel
from .reports import DEFAULT_K, DEFAULT_N_TOT, DEFAULT_PATH_LENGTHS, DEFAULT_PLANES
from .topology import HierarchyLevel

COMMANDS = ("fig2a", "fig2b", "scaling-report", "topology-stats", "simulate")


@dataclass(frozen=True)
class DevicesConfig:
    synapse: SynapseSpec = SynapseSpec()
    soma: SomaSpec = SomaSpec()
    transmitter: TransmitterSpec = TransmitterSpec()
    stdp: StdpParams = StdpParams()
    plasticity: bool = True
    latency: DeviceLatency = DeviceLatency()
    input_weight: float = 1.0


@dataclass(frozen=True)
class PhotonicsConfig:
    eta: float = 1e-4
    f_avg: float = 100e3
    cooling_factor: float = 1000.0
    safety: float = 1.0
    detector_efficiency: float = 1.0
    delivery: Literal["deterministic", "stochastic"] = "deterministic"
    losses: LossModel = LossModel()
    indices: GroupIndex = GroupIndex()


@dataclass(frozen=True)
class LayoutConfig:
    pods: PodSpec = PodSpec(columns_per_row=2)
    neurons_per_wafer: Optional[int] = None
    use_edge_couplers: bool = True
    fiber_total: Optional[int] = None


@dataclass(frozen=True)
class SystemConfig:
    neurons: int = 10**10
    neurons_per_wafer: int = 10**6
    white_matter_coefficient: Optional[float] = None
    velocity: float = 2e8
    f_gamma: float = 20e6
    f_theta: float = 1e6


@dataclass(frozen=True)
class TopologyConfig:
    kind: Literal["random", "small_world", "hierarchical", "file"] = "random"
    n: int = 1000
    k: int = 10
    beta: float = 0.1
    levels: tuple[HierarchyLevel, ...] = ()
    weight: Optional[float] = None
    sample_size: int = 1000
    file: Optional[str] = None


@dataclass(frozen=True)
class SimulateConfig:
    t_end: float = 1e-3
    stimulus_rate: float = 1e4
    stimulus_file: Optional[str] = None
    stimulus_latency: float = 0.0


@dataclass(frozen=True)
class Fig2aConfig:
    n_tot: tuple[float, ...] = DEFAULT_N_TOT
    path_lengths: tuple[float, ...] = DEFAULT_PATH_LENGTHS


@dataclass(frozen=True)
class Fig2bConfig:
    k: tuple[int, ...] = DEFAULT_K
    planes: tuple[int, ...] = DEFAULT_PLANES


@dataclass(frozen=True)
class ScenarioConfig:
    command: Literal["fig2a", "fig2b", "scaling-report", "topology-stats", "simulate"] = "scaling-report"
    seed: int = 0
    output: str = "out"
    format: Optional[Literal["csv", "json"]] = None
    devices: DevicesConfig = DevicesConfig()
    photonics: PhotonicsConfig = PhotonicsConfig()
    wafer: WaferSpec = WaferSpec()
    column: ColumnSpec = ColumnSpec()
    layout: LayoutConfig = LayoutConfig()
    system: SystemConfig = SystemConfig()
    topology: TopologyConfig = TopologyConfig()
    simulate: SimulateConfig = SimulateConfig()
    fig2a: Fig2aConfig = Fig2aConfig()
    fig2b: Fig2bConfig = Fig2bConfig()

    # derived objects, built from the validated blocks

    def neuron_params(self) -> NeuronParams:
        d = self.devices
        return NeuronParams(
            synapse=d.synapse,
            soma=d.soma,
            transmitter=d.transmitter,
            stdp=d.stdp if d.plasticity else None,
            latency=d.latency,
            input_weight=d.input_weight,
            eta=self.photonics.eta,
        )

    def power_model(self) -> PowerModel:
        tx = self.devices.transmitter
        ph = self.photonics
        return PowerModel(ph.eta, tx.photons_per_pulse, tx.wavelength, ph.f_avg, ph.cooling_factor, tx.max_rate)


# -- dict <-> dataclass ----------------------------------------------------------------


def _type_name(tp) -> str:
    return getattr(tp, "__name__", None) or str(tp).replace("typing.", "")


def _coerce(tp, value, key: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, key)
    if origin is Literal:
        if value not in args:
            raise ConfigError(f"must be one of {list(args)}, got {value!r}", key=key)
        return value
    if origin in (tuple, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {type(value).__name__}", key=key)
        item = args[0]
        return tuple(_coerce(item, v, f"{key}[{i}]") for i, v in enumerate(value))
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"expected a mapping, got {type(value).__name__}", key=key)
        return from_dict(tp, value, key)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected bool, got {value!r}", key=key)
        return value
    if tp is int:
        if isinstance(value, str):
            value = _number(value, key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected integer, got {value!r}", key=key)
        if isinstance(value, float):
            if not value.is_integer():
                raise ConfigError(f"expected integer, got {value!r}", key=key)
            value = int(value)
        return value
    if tp is float:
        if isinstance(value, str):
            value = _number(value, key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected number, got {value!r}", key=key)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected string, got {value!r}", key=key)
        return value
    raise ConfigError(f"unsupported field type {_type_name(tp)}", key=key)


def _number(text: str, key: str):
    # YAML 1.1 reads "1e-9" (no dot) as a string
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected number, got {text!r}", key=key) from None


def from_dict(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    prefix = f"{path}." if path else ""
    for k in data:
        if k not in names:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(names))})", key=f"{prefix}{k}")
    kwargs = {k: _coerce(hints[k], v, f"{prefix}{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        leaf = (exc.key or "").rsplit(".", 1)[-1]
        raise ConfigError(exc.detail, key=f"{prefix}{leaf}" if leaf else path or None) from None


def to_dict(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


# -- public API -------------------------------------------------------------------


def validate(config: ScenarioConfig) -> ScenarioConfig:
    """Cross-block invariants that no single block can check."""
    config.neuron_params()
    config.power_model()
    cap = wafer_capacity(config.wafer)
    if config.system.neurons_per_wafer > cap:
        raise ConfigError(f"exceeds wafer capacity {cap}", key="system.neurons_per_wafer")
    npw = config.layout.neurons_per_wafer
    if npw is not None and not 1 <= npw <= cap:
        raise ConfigError(f"must be in [1, {cap}]", key="layout.neurons_per_wafer")
    if config.system.neurons < 0:
        raise ConfigError("must be >= 0", key="system.neurons")
    if config.photonics.safety < 1:
        raise ConfigError("must be >= 1", key="photonics.safety")
    if not 0 < config.photonics.detector_efficiency <= 1:
        raise ConfigError("must be in (0, 1]", key="photonics.detector_efficiency")
    if config.simulate.t_end <= 0:
        raise ConfigError("must be > 0", key="simulate.t_end")
    if config.simulate.stimulus_rate < 0:
        raise ConfigError("must be >= 0", key="simulate.stimulus_rate")
    topo = config.topology
    if topo.kind == "file" and not topo.file:
        raise ConfigError("required when kind is 'file'", key="topology.file")
    if topo.kind == "hierarchical" and not topo.levels:
        raise ConfigError("required when kind is 'hierarchical'", key="topology.levels")
    if topo.sample_size < 1:
        raise ConfigError("must be >= 1", key="topology.sample_size")
    if config.seed < 0 or config.seed >= 2**64:
        raise ConfigError("must be an unsigned 64-bit integer", key="seed")
    return config


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    return validate(from_dict(ScenarioConfig, data))


def serialize(config: ScenarioConfig) -> str:
    """Normalized YAML: every field present, every value in its declared type."""
    normalized = from_dict(ScenarioConfig, to_dict(config))
    return yaml.safe_dump(to_dict(normalized), sort_keys=False, default_flow_style=False)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
