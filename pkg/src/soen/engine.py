"""Deterministic discrete-event simulation of a placed loop-neuron network.

Time is integer picoseconds. Events are totally ordered by
``(time, kind, src, dst, payload)`` with kinds ranked
photon_arrival < fire < emission < stdp_pairing, so plasticity always sees
the spikes completed at its own timestamp.
"""

from __future__ import annotations

import gc
import hashlib
import heapq
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .devices import (
    Destination,
    SomaSpec,
    SomaState,
    StdpParams,
    SynapseSpec,
    SynapseState,
    TransmitterSpec,
    earliest_emission,
    evaluate_signal,
    soma_integrate,
    stdp_update,
    synapse_on_photon,
    transmitter_emit,
)
from .errors import CausalityError, ConfigError, EndOfSimulation, InfeasibleLinkError
from .layout import DeviceLatency, PhysicalLayout
from .photonics import DEFAULT_LOSSES, LossModel, photon_budget, photon_energy
from .rng import binomial_sampler

PS = 1e-12
EXTERNAL = -1


def to_ps(seconds: float) -> int:
    return int(round(seconds / PS))


class Kind(IntEnum):
    PHOTON_ARRIVAL = 0
    FIRE = 1
    EMISSION = 2
    STDP_PAIRING = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "Kind":
        try:
            return cls[text.upper()]
        except KeyError:
            raise ConfigError(f"unknown event kind {text!r}", key="kind") from None


@dataclass(frozen=True, order=True)
class Event:
    time: int
    kind: Kind
    src: int
    dst: int
    payload: Union[int, float] = 0

    def to_line(self) -> str:
        return format_line((self.time, int(self.kind), self.src, self.dst, self.payload))

    @classmethod
    def from_line(cls, line: str) -> "Event":
        parts = line.split()
        if len(parts) != 5:
            raise ConfigError(f"expected 'time_ps kind src dst payload', got {line!r}", key="event")
        t, kind, src, dst, payload = parts
        value = float(payload) if any(ch in payload for ch in ".eEn") else int(payload)
        return cls(int(t), Kind.parse(kind), int(src), int(dst), value)


_LABELS = [k.label for k in Kind]


def format_line(rec) -> str:
    t, kind, src, dst, payload = rec
    return f"{t} {_LABELS[kind]} {src} {dst} {payload!r}"


def read_events(text: str) -> list[Event]:
    return [Event.from_line(ln) for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def poisson_stimulus(n: int, rate: float, t_end: float, seed: int = 0) -> list[Event]:
    """External single-photon drive: independent Poisson trains at ``rate`` Hz per neuron."""
    rng = np.random.default_rng(seed)
    horizon = to_ps(t_end)
    count = int(rng.poisson(n * rate * t_end)) if n and rate > 0 else 0
    times = rng.integers(0, horizon, size=count)
    dests = rng.integers(0, n, size=count)
    pairs = sorted(set(zip(times.tolist(), dests.tolist())))
    return [Event(t, Kind.PHOTON_ARRIVAL, EXTERNAL, d, 1) for t, d in pairs]


@dataclass(frozen=True)
class NeuronParams:
    synapse: SynapseSpec = SynapseSpec()
    soma: SomaSpec = SomaSpec()
    transmitter: TransmitterSpec = TransmitterSpec()
    stdp: Optional[StdpParams] = StdpParams()  # None disables plasticity
    latency: DeviceLatency = DeviceLatency()
    # weight of the per-neuron input synapse that receives external photons
    input_weight: float = 1.0
    eta: float = 1e-4

    def __post_init__(self):
        if self.soma.refractory > 0 and self.transmitter.max_rate > (1 + 1e-12) / self.soma.refractory:
            raise ConfigError(
                f"max_rate {self.transmitter.max_rate} exceeds 1/refractory", key="transmitter.max_rate"
            )
        if not 0 < self.eta <= 1:
            raise ConfigError("must be in (0, 1]", key="photonics.eta")


class Network:
    """Topology plus per-edge link properties and device parameters.

    ``delays`` are propagation times in seconds (device latencies are added
    from ``params.latency``); ``efficiencies`` are end-to-end link efficiencies.
    """

    def __init__(
        self,
        topology,
        params: NeuronParams = NeuronParams(),
        delays=None,
        efficiencies=None,
        safety: float = 1.0,
    ):
        m = topology.n_edges
        self.topology = topology
        self.params = params
        self.delays = np.zeros(m) if delays is None else np.broadcast_to(np.asarray(delays, float), (m,)).copy()
        self.efficiencies = (
            np.ones(m) if efficiencies is None else np.broadcast_to(np.asarray(efficiencies, float), (m,)).copy()
        )
        if np.any(self.delays < 0):
            raise ConfigError("delays must be >= 0", key="delays")
        self.safety = safety
        self._check_budgets()

    @classmethod
    def from_layout(
        cls,
        layout: PhysicalLayout,
        params: NeuronParams = NeuronParams(),
        losses: LossModel = DEFAULT_LOSSES,
        safety: float = 1.0,
    ) -> "Network":
        return cls(layout.topology, params, layout.propagation_delays(), layout.link_efficiencies(losses), safety)

    def _check_budgets(self):
        photons = self.params.transmitter.photons_per_pulse
        t = self.topology
        bounds = np.searchsorted(t.src, np.arange(t.n_nodes + 1))
        for j in range(t.n_nodes):
            lo, hi = bounds[j], bounds[j + 1]
            if lo == hi:
                continue
            need = math.ceil(photon_budget(self.efficiencies[lo:hi].tolist(), self.safety) * (1 - 1e-12))
            if need > photons:
                raise InfeasibleLinkError(
                    f"neuron {j} needs {need} photons per pulse for its {hi - lo} links, "
                    f"transmitter provides {photons}"
                )


@dataclass
class EventLog:
    """Processed events in order, plus per-pulse photon accounting."""

    records: list = field(default_factory=list)
    pulses: list = field(default_factory=list)  # (time, neuron, emitted, delivered, lost)
    throttled: int = 0
    wavelength: float = 1550e-9
    eta: float = 1e-4
    n_neurons: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Event]:
        for t, k, s, d, p in self.records:
            yield Event(t, Kind(k), s, d, p)

    def lines(self) -> Iterator[str]:
        return map(format_line, self.records)

    def to_text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def write(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode("ascii"))
            h.update(b"\n")
        return h.hexdigest()

    def of_kind(self, kind: Kind) -> list:
        return [r for r in self.records if r[1] == kind]

    def spike_times(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for t, k, s, _, _ in self.records:
            if k == Kind.FIRE:
                out.setdefault(s, []).append(t)
        return out

    def summary(self) -> dict:
        kinds = Counter(r[1] for r in self.records)
        fires = [r[2] for r in self.records if r[1] == Kind.FIRE]
        emitted = sum(p[2] for p in self.pulses)
        delivered = sum(p[3] for p in self.pulses)
        lost = sum(p[4] for p in self.pulses)
        optical = emitted * photon_energy(self.wavelength)
        return {
            "events": len(self.records),
            "spikes": kinds[Kind.FIRE],
            "spiking_neurons": len(set(fires)),
            "neurons": self.n_neurons,
            "photon_arrivals": kinds[Kind.PHOTON_ARRIVAL],
            "pulses": len(self.pulses),
            "throttled": self.throttled,
            "stdp_pairings": kinds[Kind.STDP_PAIRING],
            "photons_emitted": emitted,
            "photons_delivered": delivered,
            "photons_lost": lost,
            "optical_energy_j": optical,
            "electrical_energy_j": optical / self.eta,
            "end_time_ps": self.records[-1][0] if self.records else 0,
        }

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


class Simulation:
    """Event loop over a :class:`Network`.

    ``delivery`` is ``"deterministic"`` (each path gets the integer part of
    its expected photon count) or ``"stochastic"`` (binomial draws from a
    counter-based stream keyed by ``seed`` and the pulse identity).
    """

    def __init__(
        self,
        network: Network,
        seed: int = 0,
        delivery: str = "deterministic",
        stimulus_latency: float = 0.0,
        record_pulses: bool = True,
    ):
        if delivery not in ("deterministic", "stochastic"):
            raise ConfigError(f"unknown delivery mode {delivery!r}", key="photonics.delivery")
        self.network = network
        self.seed = int(seed)
        self.delivery = delivery
        self.stimulus_latency_ps = to_ps(stimulus_latency)
        self.record_pulses = record_pulses
        p = network.params
        topo = network.topology
        n = topo.n_nodes
        self.n = n

        syn = p.synapse
        self._syn_spec = SynapseSpec(syn.weight, syn.tau_syn / PS, to_ps(syn.dead_time), syn.w_min, syn.w_max)
        self._soma_spec = SomaSpec(p.soma.threshold, to_ps(p.soma.refractory), p.soma.tau_mem / PS)
        self._input_spec = SynapseSpec(
            p.input_weight, syn.tau_syn / PS, to_ps(syn.dead_time), min(p.input_weight, syn.w_min), max(p.input_weight, syn.w_max)
        )
        if p.stdp is not None:
            s = p.stdp
            self._stdp = StdpParams(s.a_plus, s.a_minus, s.tau_plus / PS, s.tau_minus / PS)
            self._cutoff = to_ps(s.cutoff)
        else:
            self._stdp = None
            self._cutoff = -1
        self._tx = p.transmitter
        self._min_interval = to_ps(p.transmitter.min_interval)
        self._proc = to_ps(p.latency.processing)
        fixed = p.latency.transmitter + p.latency.detector

        m = topo.n_edges
        self._src = topo.src.tolist()
        self._dst = topo.dst.tolist()
        # synapse index: edges first, then one input synapse per neuron
        self._syn = [SynapseState(0.0, 0, -math.inf, w) for w in topo.weight.tolist()]
        self._syn += [SynapseState(0.0, 0, -math.inf, p.input_weight) for _ in range(n)]
        self._is_input = [False] * m + [True] * n
        self._edge_of = {(s, d): e for e, (s, d) in enumerate(zip(self._src, self._dst))}
        incoming: list[list[int]] = [[] for _ in range(n)]
        for e, d in enumerate(self._dst):
            incoming[d].append(e)
        for j in range(n):
            incoming[j].append(m + j)
        self._incoming = incoming
        delays_ps = [max(1, to_ps(d + fixed)) for d in network.delays.tolist()]
        fanout: list[list[Destination]] = [[] for _ in range(n)]
        for e, (s, d) in enumerate(zip(self._src, self._dst)):
            fanout[s].append(Destination(d, float(network.efficiencies[e]), delays_ps[e]))
        self._fanout = fanout
        self._delays_ps = delays_ps
        # deterministic pulses are identical up to a time shift; partition once
        self._templates = []
        for j in range(n):
            pulse = transmitter_emit(self._tx, fanout[j], 0, None, None, self._min_interval)
            arrivals = tuple((int(d.time), d.target, d.delivered) for d in pulse.deliveries if d.delivered > 0)
            self._templates.append((arrivals, pulse.photons, pulse.delivered, pulse.lost))
        # all synapses of a neuron share tau_syn, so their summed signal is a
        # single decaying accumulator: (value, time of last update)
        self._acc = [(0.0, 0)] * n
        # a fire resets every synapse of the neuron; a synapse whose epoch lags
        # its neuron's has been reset since it was last touched
        self._reset_at = [0] * n
        self._epoch = [0] * n
        self._syn_epoch = [0] * len(self._syn)
        self._tau = self._syn_spec.tau_syn
        self._soma = [SomaState() for _ in range(n)]
        self._last_emit: list[Optional[int]] = [None] * n

        self.now = 0
        self._queue: list = []
        self.log = EventLog(wavelength=p.transmitter.wavelength, eta=p.eta, n_neurons=n)

    # -- scheduling --------------------------------------------------------------

    def schedule(self, event: Event) -> None:
        if event.time < self.now:
            raise CausalityError(f"{event.to_line()!r} precedes current time {self.now} ps")
        heapq.heappush(self._queue, (event.time, int(event.kind), event.src, event.dst, event.payload))

    def add_stimulus(self, events: Iterable[Event]) -> None:
        """Queue external photon arrivals, shifted by the stimulus latency.

        Duplicate (time, src, dst) photons are merged into one arrival.
        """
        merged: dict[tuple[int, int, int], int] = {}
        for ev in events:
            if ev.kind != Kind.PHOTON_ARRIVAL:
                raise ConfigError(f"stimulus events must be photon_arrival, got {ev.kind.label}", key="stimulus")
            if not 0 <= ev.dst < self.n:
                raise ConfigError(f"stimulus destination {ev.dst} out of range", key="stimulus")
            if ev.src != EXTERNAL and (ev.src, ev.dst) not in self._edge_of:
                raise ConfigError(f"stimulus on missing edge {ev.src}->{ev.dst}", key="stimulus")
            key = (ev.time + self.stimulus_latency_ps, ev.src, ev.dst)
            merged[key] = merged.get(key, 0) + int(ev.payload)
        for (t, s, d), photons in sorted(merged.items()):
            self.schedule(Event(t, Kind.PHOTON_ARRIVAL, s, d, photons))

    def pending(self) -> int:
        return len(self._queue)

    def peek_time(self) -> Optional[int]:
        return self._queue[0][0] if self._queue else None

    # -- processing ----------------------------------------------------------------

    def step(self) -> Event:
        if not self._queue:
            raise EndOfSimulation("event queue is empty")
        t, k, s, d, p = self._process()
        return Event(t, Kind(k), s, d, p)

    def run(self, t_end: Optional[float] = None) -> EventLog:
        """Process events until the queue drains or the next event is at or past ``t_end``."""
        horizon = math.inf if t_end is None else to_ps(t_end)
        queue = self._queue
        process = self._process
        # the log holds only acyclic tuples; cyclic GC passes over it are pure overhead
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            while queue and queue[0][0] < horizon:
                process()
        finally:
            if was_enabled:
                gc.enable()
        return self.log

    def _process(self):
        rec = heapq.heappop(self._queue)
        t, kind, src, dst, payload = rec
        self.now = t
        self.log.records.append(rec)
        if kind == 0:
            self._on_arrival(t, src, dst, payload)
        elif kind == 1:
            self._on_fire(t, src, payload)
        elif kind == 2:
            self._on_emission(t, src, payload)
        else:
            self._on_pairing(t, src, dst, payload)
        return rec

    def _on_arrival(self, t, src, dst, photons):
        if photons <= 0:
            return
        queue = self._queue
        e = self.n_edges + dst if src == EXTERNAL else self._edge_of[(src, dst)]
        old = self._syn[e]
        if self._syn_epoch[e] != self._epoch[dst]:
            old = SynapseState(0.0, self._reset_at[dst], old.last_photon, old.weight)
            self._syn_epoch[e] = self._epoch[dst]
        new = synapse_on_photon(old, self._input_spec if src == EXTERNAL else self._syn_spec, t)
        self._syn[e] = new
        if new.last_photon == old.last_photon:
            return  # inside detector dead time
        soma = self._soma[dst]
        if self._stdp is not None and src != EXTERNAL:
            lf = soma.last_fire
            if lf < t and t - lf <= self._cutoff:
                heapq.heappush(queue, (t, 3, src, dst, int(lf - t)))
        value, since = self._acc[dst]
        if value and t != since:
            value *= math.exp((since - t) / self._tau)
        value += new.weight
        new_soma, decision = soma_integrate(soma, (value,), t, self._soma_spec, self._proc)
        if decision is None:
            self._acc[dst] = (value, t)
            return
        self._soma[dst] = new_soma
        self._acc[dst] = (0.0, t)
        self._reset_at[dst] = t
        self._epoch[dst] += 1
        heapq.heappush(queue, (int(decision.time), 1, dst, dst, decision.signal))

    def synapse_signal(self, src: int, dst: int, t: Optional[int] = None) -> float:
        """Signal held by synapse ``src -> dst`` at ``t`` ps (default: now)."""
        e = self.n_edges + dst if src == EXTERNAL else self._edge_of[(src, dst)]
        t = self.now if t is None else t
        if self._syn_epoch[e] != self._epoch[dst]:
            return 0.0
        return evaluate_signal(self._syn[e], self._syn_spec, t)

    def soma_signal(self, j: int, t: Optional[int] = None) -> float:
        t = self.now if t is None else t
        value, since = self._acc[j]
        return value * math.exp((since - t) / self._tau)

    def _on_fire(self, t, j, _signal):
        push = heapq.heappush
        queue = self._queue
        if self._stdp is not None:
            cutoff = self._cutoff
            syn = self._syn
            src = self._src
            for e in self._incoming[j]:
                if self._is_input[e]:
                    continue
                lp = syn[e].last_photon
                if lp != -math.inf and 0 <= t - lp <= cutoff:
                    push(queue, (t, 3, src[e], j, int(t - lp)))
        when = earliest_emission(t, self._last_emit[j], self._min_interval)
        if when != t:
            self.log.throttled += 1
        self._last_emit[j] = when
        push(queue, (when, 2, j, j, self._tx.photons_per_pulse))

    def _on_emission(self, t, j, photons):
        queue = self._queue
        if self.delivery == "deterministic":
            arrivals, emitted, delivered, lost = self._templates[j]
            for delay, target, count in arrivals:
                heapq.heappush(queue, (t + delay, 0, j, target, count))
        else:
            sampler = binomial_sampler(self.seed, j, t)
            pulse = transmitter_emit(self._tx, self._fanout[j], t, None, sampler, self._min_interval)
            for d in pulse.deliveries:
                if d.delivered > 0:
                    heapq.heappush(queue, (int(d.time), 0, j, d.target, d.delivered))
            emitted, delivered, lost = pulse.photons, pulse.delivered, pulse.lost
        if self.record_pulses:
            self.log.pulses.append((t, j, emitted, delivered, lost))

    def _on_pairing(self, t, pre, post, dt):
        e = self._edge_of[(pre, post)]
        s = self._syn[e]
        spec = self._syn_spec
        w = stdp_update(s.weight, dt, self._stdp, spec.w_min, spec.w_max)
        self._syn[e] = SynapseState(s.signal, s.last_update, s.last_photon, w)

    # -- inspection ------------------------------------------------------------------

    @property
    def n_edges(self) -> int:
        return len(self._src)

    def weights(self) -> np.ndarray:
        return np.array([s.weight for s in self._syn[: self.n_edges]])

    def edge_delay_ps(self, src: int, dst: int) -> int:
        return self._delays_ps[self._edge_of[(src, dst)]]


def run(
    network: Network,
    stimulus: Sequence[Event] = (),
    t_end: Optional[float] = None,
    seed: int = 0,
    delivery: str = "deterministic",
    stimulus_latency: float = 0.0,
) -> EventLog:
    """Build a simulation, queue ``stimulus``, and run it to ``t_end``."""
    horizon = None if t_end is None else to_ps(t_end)
    if horizon is not None:
        for ev in stimulus:
            if ev.time >= horizon:
                raise ConfigError(f"stimulus at {ev.time} ps is not before t_end", key="stimulus")
    sim = Simulation(network, seed=seed, delivery=delivery, stimulus_latency=stimulus_latency)
    sim.add_stimulus(stimulus)
    return sim.run(t_end)
