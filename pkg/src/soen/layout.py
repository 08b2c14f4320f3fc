"""Physical realization: wafer capacity, octagonal tiling, columns, fiber tracts,
propagation latency, system volume, and communication-limited span.

Wafers are regular octagons inscribed in the wafer circle, with flats facing
the cardinal and diagonal directions. Columns sit on a square grid whose pitch
is the flat-to-flat width, so cardinal neighbours share an edge and the
square voids at the diagonals hold the fiber tracts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import ConfigError, PlacementError, WhiteMatterOverflowError
from .photonics import DEFAULT_INDICES, DEFAULT_LOSSES, GroupIndex, LinkPath, LossModel, Segment
from .topology import Topology

NOMINAL_FIBERS_PER_TRACT = 1_000_000
WHITE_MATTER_EXPONENT = 4.0 / 3.0


@dataclass(frozen=True)
class WaferSpec:
    radius: float = 0.15
    waveguide_pitch: float = 1.5e-6
    planes: int = 6
    k_in: int = 1000
    vertical_pitch: float = 25e-6
    edge_pitch: float = 10e-6

    def __post_init__(self):
        for name in ("radius", "waveguide_pitch", "vertical_pitch", "edge_pitch"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", key=f"wafer.{name}")
        if self.planes < 1:
            raise ConfigError("must be >= 1", key="wafer.planes")
        if self.k_in < 1:
            raise ConfigError("must be >= 1", key="wafer.k_in")


@dataclass(frozen=True)
class ColumnSpec:
    wafers_per_column: int = 6
    wafer_spacing: float = 0.01
    fiber_diameter: float = 125e-6

    def __post_init__(self):
        if self.wafers_per_column < 1:
            raise ConfigError("must be >= 1", key="column.wafers_per_column")
        if not self.wafer_spacing > 0:
            raise ConfigError("must be > 0", key="column.wafer_spacing")
        if not self.fiber_diameter > 0:
            raise ConfigError("must be > 0", key="column.fiber_diameter")


@dataclass(frozen=True)
class PodSpec:
    """How columns are tiled in the plane: row-major on a square grid."""

    columns_per_row: int = 1

    def __post_init__(self):
        if self.columns_per_row < 1:
            raise ConfigError("must be >= 1", key="pods.columns_per_row")


@dataclass(frozen=True)
class DeviceLatency:
    transmitter: float = 0.0
    detector: float = 0.0
    processing: float = 50e-12

    @property
    def total(self) -> float:
        return self.transmitter + self.detector + self.processing


# -- octagon geometry ---------------------------------------------------------


def octagon_area(radius: float) -> float:
    return 2.0 * math.sqrt(2.0) * radius**2


def octagon_side(radius: float) -> float:
    return 2.0 * radius * math.sin(math.pi / 8)


def octagon_apothem(radius: float) -> float:
    return radius * math.cos(math.pi / 8)


def in_octagon(x, y, radius: float, tol: float = 1e-12):
    """Vectorized point-in-octagon test for an octagon centred at the origin."""
    a = octagon_apothem(radius) * (1 + tol)
    ax, ay = np.abs(x), np.abs(y)
    return (ax <= a) & (ay <= a) & (ax + ay <= a * math.sqrt(2.0))


# -- capacity formulas --------------------------------------------------------


def keyes_capacity(spec: WaferSpec) -> float:
    """Area-limited neuron count before flooring (Keyes wiring estimate)."""
    return octagon_area(spec.radius) * (spec.planes / (spec.waveguide_pitch * spec.k_in)) ** 2


def wafer_capacity(spec: WaferSpec) -> int:
    return math.floor(keyes_capacity(spec))


def vertical_link_count(spec: WaferSpec) -> int:
    """Free-space links between one adjacent wafer pair."""
    return math.floor(octagon_area(spec.radius) / spec.vertical_pitch**2)


def edge_coupler_count(spec: WaferSpec) -> int:
    """Edge couplers along one octagon side (one cardinal direction)."""
    return math.floor(octagon_side(spec.radius) / spec.edge_pitch)


@dataclass(frozen=True)
class FiberTract:
    total: int
    per_wafer: int
    side: float
    packing: str = "square"


def fiber_tract_capacity(
    column: ColumnSpec = ColumnSpec(),
    wafer: WaferSpec = WaferSpec(),
    tract_side: Optional[float] = None,
    nominal_total: Optional[int] = None,
) -> FiberTract:
    """Fibers in one diagonal void, square-packed, and their share per wafer.

    ``nominal_total`` overrides the packing estimate (e.g. the round
    one-million figure).
    """
    side = octagon_side(wafer.radius) if tract_side is None else tract_side
    if side < 0:
        raise ConfigError("must be >= 0", key="tract_side")
    if nominal_total is None:
        total = math.floor(side**2 / column.fiber_diameter**2)
    else:
        total = int(nominal_total)
    return FiberTract(total, total // column.wafers_per_column, side)


def wafers_required(neurons: int, neurons_per_wafer: int) -> int:
    if neurons_per_wafer < 1:
        raise ConfigError("must be >= 1", key="system.neurons_per_wafer")
    return -(-int(neurons) // int(neurons_per_wafer))


def max_span(f_osc: float, velocity: float = 2e8) -> float:
    """Largest linear extent a signal can cross within one oscillation period."""
    if not f_osc > 0:
        raise ConfigError("oscillation frequency must be > 0", key="f_osc")
    if not velocity > 0:
        raise ConfigError("velocity must be > 0", key="velocity")
    return velocity / f_osc


@dataclass(frozen=True)
class SystemVolume:
    grey_m3: float
    white_m3: float

    @property
    def total_m3(self) -> float:
        return self.grey_m3 + self.white_m3


def grey_volume(wafers: int, wafer: WaferSpec, column: ColumnSpec) -> float:
    return wafers * octagon_area(wafer.radius) * column.wafer_spacing


def calibrate_white_matter_coefficient(
    target_total_m3: float = 8.0,
    wafers: int = 10_000,
    wafer: WaferSpec = WaferSpec(),
    column: ColumnSpec = ColumnSpec(),
) -> float:
    """Coefficient making ``grey + coeff * grey**(4/3)`` hit ``target_total_m3``."""
    grey = grey_volume(wafers, wafer, column)
    if not target_total_m3 > grey > 0:
        raise ConfigError(
            f"target volume {target_total_m3} must exceed grey volume {grey}", key="target_total_m3"
        )
    return (target_total_m3 - grey) / grey**WHITE_MATTER_EXPONENT


# 8 m^3 total at 10^4 wafers
DEFAULT_WHITE_MATTER_COEFFICIENT = calibrate_white_matter_coefficient()


def system_volume(
    wafers: int,
    wafer: WaferSpec = WaferSpec(),
    column: ColumnSpec = ColumnSpec(),
    white_matter_coefficient: float = DEFAULT_WHITE_MATTER_COEFFICIENT,
) -> SystemVolume:
    if not white_matter_coefficient > 0:
        raise ConfigError("must be > 0", key="system.white_matter_coefficient")
    if wafers < 0:
        raise ConfigError("must be >= 0", key="wafers")
    grey = grey_volume(wafers, wafer, column)
    return SystemVolume(grey, white_matter_coefficient * grey**WHITE_MATTER_EXPONENT)


# -- placement ---------------------------------------------------------------

ROUTES = ("local", "vertical", "edge_coupler", "fiber")
LOCAL, VERTICAL, EDGE_COUPLER, FIBER = range(4)
# medium of the middle segment per route (local and edge-coupler routes have none with length)
_MID_MEDIUM = ("waveguide", "free_space_vertical", "edge_coupler", "fiber")


@dataclass(frozen=True, eq=False)
class PhysicalLayout:
    """Neuron placement plus one route per edge, stored as per-edge arrays.

    Every route is ``waveguide(wg_in) -> middle(mid) -> waveguide(wg_out)``
    with the middle medium fixed by the route kind; :attr:`paths` expands
    them into :class:`LinkPath` objects on first use.
    """

    topology: Topology
    wafer_spec: WaferSpec
    column_spec: ColumnSpec
    pods: PodSpec
    neurons_per_wafer: int
    positions: np.ndarray  # (n, 3) metres
    wafer: np.ndarray  # global wafer id per neuron
    column: np.ndarray
    level: np.ndarray  # wafer index inside its column
    column_xy: np.ndarray  # (n_columns, 2)
    route_code: np.ndarray  # index into ROUTES, per edge
    wg_in: np.ndarray  # source-side waveguide length, per edge
    mid: np.ndarray  # vertical or fiber length, per edge
    wg_out: np.ndarray  # destination-side waveguide length, per edge
    detector_efficiency: float = 1.0
    fiber_demand: dict = field(default_factory=dict)
    indices: GroupIndex = DEFAULT_INDICES

    @property
    def n_wafers(self) -> int:
        return int(self.wafer.max()) + 1 if self.wafer.size else 0

    @property
    def n_columns(self) -> int:
        return int(self.column_xy.shape[0])

    @cached_property
    def routes(self) -> tuple[str, ...]:
        return tuple(ROUTES[c] for c in self.route_code.tolist())

    @cached_property
    def paths(self) -> tuple[LinkPath, ...]:
        return tuple(self.path(i) for i in range(self.route_code.size))

    def path(self, i: int) -> LinkPath:
        code = int(self.route_code[i])
        a, m, b = float(self.wg_in[i]), float(self.mid[i]), float(self.wg_out[i])
        if code == LOCAL:
            segs = (Segment("waveguide", a, 1),)
        elif code == VERTICAL:
            segs = (Segment("free_space_vertical", m, 0),)
            if a > 0:
                segs = (Segment("waveguide", a, 1),) + segs
        elif code == EDGE_COUPLER:
            segs = (Segment("waveguide", a, 1), Segment("edge_coupler", 0.0, 1), Segment("waveguide", b, 0))
        else:
            segs = (Segment("waveguide", a, 1), Segment("fiber", m, 2), Segment("waveguide", b, 0))
        return LinkPath(segs, self.detector_efficiency)

    def taps(self) -> np.ndarray:
        per_route = np.array([1, 1, 2, 3])
        t = per_route[self.route_code]
        # a vertical link between aligned neurons has no lateral waveguide
        return t - ((self.route_code == VERTICAL) & (self.wg_in == 0))

    def propagation_delays(self) -> np.ndarray:
        """Per-edge time of flight in seconds, device latencies excluded."""
        idx = self.indices
        n_mid = np.array([idx.of(m) for m in _MID_MEDIUM])[self.route_code]
        return ((self.wg_in + self.wg_out) * idx.waveguide + self.mid * n_mid) / SPEED_OF_LIGHT

    def link_efficiencies(self, losses: LossModel = DEFAULT_LOSSES) -> np.ndarray:
        """Per-edge end-to-end efficiency, matching :func:`link_efficiency` on :attr:`paths`."""
        db_mid = np.array([losses.db_per_m(m) for m in _MID_MEDIUM])[self.route_code]
        db = (self.wg_in + self.wg_out) * losses.waveguide + self.mid * db_mid + self.taps() * losses.tap_db
        return 10.0 ** (-db / 10.0) * self.detector_efficiency

    def edge_index(self, edge: Union[int, tuple[int, int]]) -> int:
        if isinstance(edge, (int, np.integer)):
            return int(edge)
        s, d = edge
        t = self.topology
        lo = np.searchsorted(t.src, s, side="left")
        hi = np.searchsorted(t.src, s, side="right")
        j = lo + np.searchsorted(t.dst[lo:hi], d)
        if j >= hi or t.dst[j] != d:
            raise KeyError(f"edge {edge} not in layout")
        return int(j)

    def route_counts(self) -> dict:
        counts = np.bincount(self.route_code, minlength=len(ROUTES))
        return dict(zip(ROUTES, counts.tolist()))

    def edge_delays(self, latency: DeviceLatency = DeviceLatency()) -> np.ndarray:
        """Per-edge emission-to-soma latency in seconds."""
        return self.propagation_delays() + latency.total


def propagation_delay(path: LinkPath, indices: GroupIndex = DEFAULT_INDICES) -> float:
    return math.fsum(s.length * indices.of(s.medium) for s in path.segments) / SPEED_OF_LIGHT


def path_latency(
    layout_or_path: Union[PhysicalLayout, LinkPath],
    edge=None,
    latency: DeviceLatency = DeviceLatency(),
    indices: Optional[GroupIndex] = None,
) -> float:
    """Propagation time over every segment plus fixed device latencies.

    Depends only on the layout, never on traffic.
    """
    if isinstance(layout_or_path, PhysicalLayout):
        path = layout_or_path.path(layout_or_path.edge_index(edge))
        indices = indices or layout_or_path.indices
    else:
        path = layout_or_path
        indices = indices or DEFAULT_INDICES
    return propagation_delay(path, indices) + latency.total


def _grid_offsets(count: int, apothem: float) -> np.ndarray:
    """Cell-centred square grid inside the octagon's incircle."""
    g = max(1, math.ceil(math.sqrt(count)))
    half = apothem / math.sqrt(2.0)
    step = 2 * half / g
    coords = -half + (np.arange(g) + 0.5) * step
    slots = np.arange(count)
    return np.column_stack([coords[slots % g], coords[slots // g]])


def _manhattan(p, q) -> np.ndarray:
    return np.abs(p[..., 0] - q[..., 0]) + np.abs(p[..., 1] - q[..., 1])


def _distinct_counts(keys: np.ndarray, group_cols: int) -> tuple[np.ndarray, np.ndarray]:
    """Count distinct rows of ``keys`` per leading ``group_cols`` columns."""
    if not keys.shape[0]:
        return np.empty((0, group_cols), np.int64), np.empty(0, np.int64)
    rows = np.unique(keys, axis=0)
    groups, counts = np.unique(rows[:, :group_cols], axis=0, return_counts=True)
    return groups, counts


def place_system(
    t: Topology,
    wafer: WaferSpec = WaferSpec(),
    column: ColumnSpec = ColumnSpec(),
    pods: PodSpec = PodSpec(),
    neurons_per_wafer: Optional[int] = None,
    n_wafers: Optional[int] = None,
    detector_efficiency: float = 1.0,
    use_edge_couplers: bool = True,
    fiber_total: Optional[int] = None,
    indices: GroupIndex = DEFAULT_INDICES,
    seed: Optional[int] = None,
) -> PhysicalLayout:
    """Assign neurons to wafers in index order and route every edge.

    Generators number neurons group by group, so index order keeps co-grouped
    neurons on the same wafer. Routes: same wafer -> waveguide; same column ->
    vertical free-space link; cardinal neighbour column at the same level ->
    edge coupler (when enabled); everything else -> fiber via the nearest
    diagonal tract. Placement is deterministic, so ``seed`` is accepted but unused.
    """
    capacity = wafer_capacity(wafer)
    npw = capacity if neurons_per_wafer is None else int(neurons_per_wafer)
    if npw < 1:
        raise ConfigError("must be >= 1", key="neurons_per_wafer")
    if npw > capacity:
        raise PlacementError(f"wafer 0 overfull: {npw} neurons exceed capacity {capacity}")
    if not 0 < detector_efficiency <= 1:
        raise ConfigError("must be in (0, 1]", key="detector_efficiency")
    n = t.n_nodes
    needed = wafers_required(n, npw) if n else 0
    if n_wafers is not None and needed > n_wafers:
        last = max(n_wafers - 1, 0)
        raise PlacementError(
            f"wafer {last} overfull: {n} neurons need {needed} wafers of {npw}, only {n_wafers} declared"
        )

    ids = np.arange(n)
    wafer_of = ids // npw
    column_of = wafer_of // column.wafers_per_column
    level_of = wafer_of % column.wafers_per_column
    n_cols = int(column_of.max()) + 1 if n else 0
    a = octagon_apothem(wafer.radius)
    pitch = 2 * a
    cols = np.arange(n_cols)
    grid = np.column_stack([cols % pods.columns_per_row, cols // pods.columns_per_row])
    column_xy = grid * pitch
    # size the grid by the neurons actually present so a lone neuron sits at the centre
    local = _grid_offsets(min(npw, n), a)[ids % npw] if n else np.zeros((0, 2))
    positions = np.zeros((n, 3))
    if n:
        positions[:, :2] = column_xy[column_of] + local
        positions[:, 2] = level_of * column.wafer_spacing

    u, v = t.src, t.dst
    m = u.size
    pu, pv = positions[u], positions[v]
    wu, wv = wafer_of[u], wafer_of[v]
    cu, cv = column_of[u], column_of[v]
    dz = np.abs(pv[:, 2] - pu[:, 2])
    same_wafer = wu == wv
    same_col = (cu == cv) & ~same_wafer
    dg = grid[cv] - grid[cu] if m else np.zeros((0, 2), np.int64)
    coupled = (
        ~same_wafer
        & ~same_col
        & bool(use_edge_couplers)
        & (level_of[u] == level_of[v])
        & (np.abs(dg).sum(axis=1) == 1)
    )
    fibered = ~same_wafer & ~same_col & ~coupled

    code = np.full(m, FIBER, dtype=np.int8)
    code[same_wafer] = LOCAL
    code[same_col] = VERTICAL
    code[coupled] = EDGE_COUPLER
    wg_in = np.zeros(m)
    mid = np.zeros(m)
    wg_out = np.zeros(m)

    direct = same_wafer | same_col
    wg_in[direct] = _manhattan(pu[direct], pv[direct])
    mid[same_col] = dz[same_col]

    ports = column_xy[cu[coupled]] + dg[coupled] * a
    wg_in[coupled] = _manhattan(pu[coupled], ports)
    wg_out[coupled] = _manhattan(ports, pv[coupled])

    if fibered.any():
        cen_u, cen_v = column_xy[cu[fibered]], column_xy[cv[fibered]]
        su = np.where(pu[fibered, :2] >= cen_u, 1.0, -1.0)
        sv = np.where(pv[fibered, :2] >= cen_v, 1.0, -1.0)
        tract_u, tract_v = cen_u + su * a, cen_v + sv * a
        # each tract is entered through the midpoint of the diagonal flat facing it
        exit_u, exit_v = cen_u + su * (a / math.sqrt(2.0)), cen_v + sv * (a / math.sqrt(2.0))
        wg_in[fibered] = _manhattan(pu[fibered], exit_u)
        mid[fibered] = np.hypot(*(tract_v - tract_u).T) + dz[fibered]
        wg_out[fibered] = _manhattan(exit_v, pv[fibered])

    # one output fiber per (source neuron, destination column)
    tract = fiber_tract_capacity(column, wafer, nominal_total=fiber_total)
    groups, counts = _distinct_counts(np.column_stack([wu[fibered], u[fibered], cv[fibered]]), 1)
    fiber_demand = {int(w): int(c) for w, c in zip(groups[:, 0], counts)}
    for w, demand in fiber_demand.items():
        if demand > tract.per_wafer:
            raise WhiteMatterOverflowError(
                f"wafer {w} needs {demand} output fibers, tract share is {tract.per_wafer}"
            )
    couplers = edge_coupler_count(wafer)
    groups, counts = _distinct_counts(np.column_stack([wu[coupled], wv[coupled], u[coupled]]), 2)
    for (w0, w1), c in zip(groups.tolist(), counts.tolist()):
        if c > couplers:
            raise PlacementError(f"wafer {w0} needs {c} edge couplers toward wafer {w1}, side holds {couplers}")
    vlinks = vertical_link_count(wafer)
    groups, counts = _distinct_counts(np.column_stack([wu[same_col], wv[same_col], u[same_col]]), 2)
    for (w0, w1), c in zip(groups.tolist(), counts.tolist()):
        if c > vlinks:
            raise PlacementError(f"wafer {w0} needs {c} vertical links toward wafer {w1}, pair holds {vlinks}")

    for arr in (positions, wafer_of, column_of, level_of, column_xy, code, wg_in, mid, wg_out):
        arr.setflags(write=False)
    return PhysicalLayout(
        topology=t,
        wafer_spec=wafer,
        column_spec=column,
        pods=pods,
        neurons_per_wafer=npw,
        positions=positions,
        wafer=wafer_of,
        column=column_of,
        level=level_of,
        column_xy=column_xy,
        route_code=code,
        wg_in=wg_in,
        mid=mid,
        wg_out=wg_out,
        detector_efficiency=float(detector_efficiency),
        fiber_demand=fiber_demand,
        indices=indices,
    )


def all_inside_octagons(layout: PhysicalLayout) -> bool:
    if not layout.positions.shape[0]:
        return True
    rel = layout.positions[:, :2] - layout.column_xy[layout.column]
    return bool(np.all(in_octagon(rel[:, 0], rel[:, 1], layout.wafer_spec.radius)))
