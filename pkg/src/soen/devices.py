"""Behavioral loop-neuron devices: synapses, soma, transmitter, and STDP.

Every function here is a pure transition: it takes a state and returns a new
one. Times are in seconds by default, but any consistent unit works (the
engine passes integer picoseconds so that comparisons are exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .errors import ConfigError, OrderingError

#: Fixed JJ processing delay between photon detection and its effect on the soma.
PROCESSING_LATENCY = 50e-12


def _require(ok, key, message):
    if not ok:
        raise ConfigError(message, key=key)


@dataclass(frozen=True)
class SynapseSpec:
    weight: float = 0.5
    tau_syn: float = 10e-9
    dead_time: float = 50e-9
    w_min: float = 0.0
    w_max: float = 1.0

    def __post_init__(self):
        _require(self.tau_syn > 0, "synapse.tau_syn", "must be > 0")
        _require(self.dead_time >= 0, "synapse.dead_time", "must be >= 0")
        _require(self.w_min <= self.w_max, "synapse.w_min", "must be <= w_max")
        _require(
            self.w_min <= self.weight <= self.w_max,
            "synapse.weight",
            f"must lie in [w_min, w_max] = [{self.w_min}, {self.w_max}]",
        )


@dataclass(frozen=True)
class SomaSpec:
    threshold: float = 1.0
    refractory: float = 50e-9
    # carried for configuration; the soma reads the instantaneous synaptic sum
    tau_mem: float = 100e-9

    def __post_init__(self):
        _require(self.threshold > 0, "soma.threshold", "must be > 0")
        _require(self.refractory >= 0, "soma.refractory", "must be >= 0")
        _require(self.tau_mem > 0, "soma.tau_mem", "must be > 0")


@dataclass(frozen=True)
class TransmitterSpec:
    photons_per_pulse: int = 10_000
    max_rate: float = 20e6
    wavelength: float = 1550e-9

    def __post_init__(self):
        _require(self.photons_per_pulse >= 0, "transmitter.photons_per_pulse", "must be >= 0")
        _require(self.max_rate > 0, "transmitter.max_rate", "must be > 0")
        _require(self.wavelength > 0, "transmitter.wavelength", "must be > 0")

    @property
    def min_interval(self) -> float:
        return 1.0 / self.max_rate


@dataclass(frozen=True)
class StdpParams:
    """Pair-based exponential STDP window."""

    a_plus: float = 0.01
    a_minus: float = 0.01
    tau_plus: float = 100e-9
    tau_minus: float = 100e-9

    def __post_init__(self):
        for name in ("a_plus", "a_minus", "tau_plus", "tau_minus"):
            _require(getattr(self, name) > 0, f"stdp.{name}", "must be > 0")

    @property
    def cutoff(self) -> float:
        """Pairing window beyond which the update is treated as zero."""
        return 5.0 * max(self.tau_plus, self.tau_minus)


@dataclass(frozen=True, slots=True)
class SynapseState:
    signal: float = 0.0
    last_update: float = 0.0
    last_photon: float = -math.inf
    weight: float = 0.5

    @classmethod
    def initial(cls, spec: SynapseSpec, t: float = 0.0) -> "SynapseState":
        return cls(0.0, t, -math.inf, spec.weight)


@dataclass(frozen=True, slots=True)
class SomaState:
    last_fire: float = -math.inf


@dataclass(frozen=True, slots=True)
class FireDecision:
    time: float
    signal: float


def evaluate_signal(state: SynapseState, spec: SynapseSpec, t: float) -> float:
    """Stored loop signal at time ``t``; does not mutate ``state``."""
    dt = t - state.last_update
    if dt < 0:
        raise OrderingError(f"query at t={t} precedes last update {state.last_update}")
    if dt == 0 or state.signal == 0.0:
        return state.signal
    return state.signal * math.exp(-dt / spec.tau_syn)


def synapse_on_photon(state: SynapseState, spec: SynapseSpec, t: float) -> SynapseState:
    """Detect one photon at ``t``.

    Photons landing inside the detector dead time only advance ``last_update``
    (with the signal decayed to ``t``); otherwise the signal is decayed to
    ``t`` and incremented by the synaptic weight.
    """
    signal = evaluate_signal(state, spec, t)
    if t - state.last_photon < spec.dead_time:
        return SynapseState(signal, t, state.last_photon, state.weight)
    return SynapseState(signal + state.weight, t, t, state.weight)


def soma_integrate(
    state: SomaState,
    signals: Iterable[float],
    t: float,
    spec: SomaSpec,
    latency: float = PROCESSING_LATENCY,
) -> tuple[SomaState, Optional[FireDecision]]:
    """Threshold the summed synaptic signals at ``t``.

    Returns the new soma state and a fire decision timestamped ``t + latency``,
    or ``None`` when the input is sub-threshold or the soma is refractory. On a
    fire decision the caller is responsible for resetting the synaptic signals.
    """
    fire_time = t + latency
    if fire_time - state.last_fire < spec.refractory:
        return state, None
    total = sum(signals)
    if total < spec.threshold:
        return state, None
    return SomaState(fire_time), FireDecision(fire_time, total)


def stdp_delta(dt: float, params: StdpParams) -> float:
    """Unclipped weight change for a spike pair separated by ``dt = t_post - t_pre``."""
    if dt >= 0:
        return params.a_plus * math.exp(-dt / params.tau_plus)
    return -params.a_minus * math.exp(dt / params.tau_minus)


def stdp_update(
    weight: float, dt: float, params: StdpParams, w_min: float = 0.0, w_max: float = 1.0
) -> float:
    if math.isnan(dt):
        raise ValueError("dt must not be NaN")
    return min(w_max, max(w_min, weight + stdp_delta(dt, params)))


# -- transmitter ------------------------------------------------------------


@dataclass(frozen=True)
class Destination:
    target: int
    efficiency: float = 1.0
    latency: float = 0.0


@dataclass(frozen=True)
class Delivery:
    target: int
    allocated: int
    delivered: int
    time: float

    @property
    def lost(self) -> int:
        return self.allocated - self.delivered


@dataclass(frozen=True)
class PulseEvent:
    time: float
    photons: int
    throttled: bool
    deliveries: tuple[Delivery, ...] = field(default_factory=tuple)

    @property
    def delivered(self) -> int:
        return sum(d.delivered for d in self.deliveries)

    @property
    def unrouted(self) -> int:
        """Photons not allocated to any path (only nonzero for an empty fan-out)."""
        return self.photons - sum(d.allocated for d in self.deliveries)

    @property
    def lost(self) -> int:
        return sum(d.lost for d in self.deliveries) + self.unrouted


def earliest_emission(t, last_emission, min_interval):
    """Earliest legal emission time for a request at ``t``."""
    if last_emission is None:
        return t
    return max(t, last_emission + min_interval)


def partition_photons(photons: int, efficiencies: Sequence[float]) -> list[int]:
    """Split a pulse across paths in proportion to each path's budget ``1/eta``.

    Uses largest-remainder rounding so the parts sum exactly to ``photons``;
    ties go to the lower index.
    """
    if not efficiencies:
        return []
    for eta in efficiencies:
        if not eta > 0:
            raise ConfigError(f"path efficiency {eta} must be > 0", key="efficiency")
    budgets = [1.0 / eta for eta in efficiencies]
    total = math.fsum(budgets)
    exact = [photons * b / total for b in budgets]
    parts = [math.floor(x) for x in exact]
    short = photons - sum(parts)
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - parts[i]), i))
    for i in order[:short]:
        parts[i] += 1
    return parts


def expected_delivery(allocated: int, efficiency: float) -> int:
    """Deterministic delivery: the integer part of the expected photon count."""
    # absorb products like 2.9999999999999996 that are exact in decimal
    return math.floor(allocated * efficiency + 1e-9)


Sampler = Callable[[int, float, int], int]


def transmitter_emit(
    spec: TransmitterSpec,
    fan_out: Sequence[Destination],
    t: float,
    last_emission: Optional[float] = None,
    sampler: Optional[Sampler] = None,
    min_interval: Optional[float] = None,
) -> PulseEvent:
    """Emit one pulse toward ``fan_out``.

    A request that violates the rate limit is deferred to the earliest legal
    time and flagged as throttled. ``sampler(allocated, efficiency, index)``
    draws the number of delivered photons; the default is deterministic.
    """
    if min_interval is None:
        min_interval = spec.min_interval
    when = earliest_emission(t, last_emission, min_interval)
    parts = partition_photons(spec.photons_per_pulse, [d.efficiency for d in fan_out])
    deliveries = []
    for i, (dest, allocated) in enumerate(zip(fan_out, parts)):
        if sampler is None:
            delivered = expected_delivery(allocated, dest.efficiency)
        else:
            delivered = sampler(allocated, dest.efficiency, i)
        deliveries.append(Delivery(dest.target, allocated, delivered, when + dest.latency))
    return PulseEvent(when, spec.photons_per_pulse, when != t, tuple(deliveries))
