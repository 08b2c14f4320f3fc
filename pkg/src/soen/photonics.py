"""Photon budgets, link efficiencies, pulse energy, and system power."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

from .errors import ConfigError, InfeasibleLinkError

MEDIA = ("waveguide", "free_space_vertical", "fiber", "edge_coupler")


@dataclass(frozen=True)
class Segment:
    medium: str
    length: float = 0.0
    taps: int = 0

    def __post_init__(self):
        if self.medium not in MEDIA:
            raise ConfigError(f"unknown medium {self.medium!r}; expected one of {MEDIA}", key="medium")
        if self.length < 0:
            raise ConfigError("segment length must be >= 0", key="length")
        if self.taps < 0:
            raise ConfigError("tap count must be >= 0", key="taps")


@dataclass(frozen=True)
class LinkPath:
    segments: tuple[Segment, ...] = ()
    detector_efficiency: float = 1.0
    source_efficiency: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for name in ("detector_efficiency", "source_efficiency"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"must be in (0, 1], got {v}", key=name)

    def __add__(self, other: "LinkPath") -> "LinkPath":
        """Concatenate segments; detector/source efficiencies come from ``self``."""
        return LinkPath(self.segments + other.segments, self.detector_efficiency, self.source_efficiency)

    @property
    def length(self) -> float:
        return sum(s.length for s in self.segments)


@dataclass(frozen=True)
class LossModel:
    """Propagation loss per medium (dB/m) and insertion loss per tap (dB)."""

    waveguide: float = 1.0
    fiber: float = 0.3e-3
    free_space_vertical: float = 0.0
    edge_coupler: float = 0.0
    tap_db: float = 0.1

    def __post_init__(self):
        for name in (*MEDIA, "tap_db"):
            if getattr(self, name) < 0:
                raise ConfigError("loss must be >= 0", key=f"losses.{name}")

    def db_per_m(self, medium: str) -> float:
        if medium not in MEDIA:
            raise ConfigError(f"unknown medium {medium!r}", key="medium")
        return getattr(self, medium)


@dataclass(frozen=True)
class GroupIndex:
    """Group index per medium, used for propagation latency."""

    waveguide: float = 2.0
    fiber: float = 1.5
    free_space_vertical: float = 1.0
    edge_coupler: float = 2.0

    def __post_init__(self):
        for name in MEDIA:
            if getattr(self, name) < 1:
                raise ConfigError("group index must be >= 1", key=f"indices.{name}")

    def of(self, medium: str) -> float:
        if medium not in MEDIA:
            raise ConfigError(f"unknown medium {medium!r}", key="medium")
        return getattr(self, medium)


DEFAULT_LOSSES = LossModel()
DEFAULT_INDICES = GroupIndex()


def path_loss_db(path: LinkPath, losses: LossModel = DEFAULT_LOSSES) -> float:
    return math.fsum(
        s.length * losses.db_per_m(s.medium) + s.taps * losses.tap_db for s in path.segments
    )


def link_efficiency(path: LinkPath, losses: LossModel = DEFAULT_LOSSES) -> float:
    """End-to-end transmission of ``path``, source efficiency excluded."""
    return 10.0 ** (-path_loss_db(path, losses) / 10.0) * path.detector_efficiency


def photon_budget(efficiencies: Iterable[float], safety: float = 1.0) -> float:
    """Real-valued photon budget ``sum(safety / eta)`` before rounding up."""
    if safety < 1:
        raise ConfigError("safety factor must be >= 1", key="safety")
    total = 0.0
    for i, eta in enumerate(efficiencies):
        if not eta > 0:
            raise InfeasibleLinkError(f"destination {i} has zero link efficiency")
        total += safety / eta
    return total


def required_photons_per_firing(
    destinations: Sequence[LinkPath], safety: float = 1.0, losses: LossModel = DEFAULT_LOSSES
) -> int:
    budget = photon_budget((link_efficiency(p, losses) for p in destinations), safety)
    # 1/eta is rarely exact in binary; do not round 1000.0000000000001 up to 1001
    return math.ceil(budget * (1 - 1e-12))


def photon_energy(wavelength: float) -> float:
    if wavelength <= 0:
        raise ConfigError("wavelength must be > 0", key="wavelength")
    return PLANCK * SPEED_OF_LIGHT / wavelength


def pulse_energy(photons: int, wavelength: float) -> float:
    if photons < 0:
        raise ConfigError("photon count must be >= 0", key="photons")
    return photons * photon_energy(wavelength)


@dataclass(frozen=True)
class PowerModel:
    eta: float = 1e-4
    photons_per_pulse: int = 10_000
    wavelength: float = 1550e-9
    f_avg: float = 100e3
    cooling_factor: float = 1000.0
    max_rate: float = 20e6

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError("source efficiency must be > 0", key="photonics.eta")
        if self.eta > 1:
            raise ConfigError("source efficiency must be <= 1", key="photonics.eta")
        if self.cooling_factor < 1:
            raise ConfigError("cooling factor must be >= 1", key="photonics.cooling_factor")
        if self.f_avg < 0:
            raise ConfigError("mean rate must be >= 0", key="photonics.f_avg")
        if self.f_avg > self.max_rate:
            raise ConfigError(
                f"mean rate {self.f_avg} exceeds transmitter max_rate {self.max_rate}",
                key="photonics.f_avg",
            )
        if self.wavelength <= 0:
            raise ConfigError("wavelength must be > 0", key="photonics.wavelength")


@dataclass(frozen=True)
class PowerReport:
    per_wafer_w: float
    device_w: float
    wallplug_w: float


def power_report(wafers: int, neurons_per_wafer: int, model: PowerModel = PowerModel()) -> PowerReport:
    per_wafer = (
        neurons_per_wafer * model.f_avg * pulse_energy(model.photons_per_pulse, model.wavelength) / model.eta
    )
    device = per_wafer * wafers
    return PowerReport(per_wafer, device, device * model.cooling_factor)
