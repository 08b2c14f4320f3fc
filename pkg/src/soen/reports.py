"""Scaling reports, degree and capacity curve tables, and their output schemas."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

from .errors import ConfigError
from .layout import (
    DEFAULT_WHITE_MATTER_COEFFICIENT,
    ColumnSpec,
    WaferSpec,
    edge_coupler_count,
    fiber_tract_capacity,
    max_span,
    system_volume,
    vertical_link_count,
    wafer_capacity,
    wafers_required,
)
from .photonics import PowerModel, power_report
from .topology import required_degree

FIG2A_COLUMNS = ("N_tot", "L", "k")
FIG2B_COLUMNS = ("k", "p", "N_300")
DEFAULT_N_TOT = tuple(10.0**e for e in range(2, 11))
DEFAULT_PATH_LENGTHS = (2, 3, 4, 5)
DEFAULT_K = (10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000)
DEFAULT_PLANES = (1, 2, 4, 6, 8)


@dataclass(frozen=True)
class ScalingReport:
    wafer_capacity: int
    vertical_links: int
    edge_couplers_per_side: int
    fiber_tract_total: int
    fibers_per_wafer: int
    grey_m3: float
    white_m3: float
    total_m3: float
    device_w: float
    wallplug_w: float
    max_span_m: float
    # context for the fixed fields above
    neurons: int
    neurons_per_wafer: int
    wafers: int
    per_wafer_w: float
    max_span_theta_m: float
    white_matter_coefficient: float
    fiber_packing: str

    def to_dict(self) -> dict:
        return {k: sig6(v) for k, v in asdict(self).items()}


def scaling_report(
    neurons: int = 10**10,
    neurons_per_wafer: int = 10**6,
    wafer: WaferSpec = WaferSpec(),
    column: ColumnSpec = ColumnSpec(),
    power: PowerModel = PowerModel(),
    white_matter_coefficient: Optional[float] = None,
    fiber_total: Optional[int] = None,
    velocity: float = 2e8,
    f_gamma: float = 20e6,
    f_theta: float = 1e6,
) -> ScalingReport:
    capacity = wafer_capacity(wafer)
    if neurons_per_wafer > capacity:
        raise ConfigError(
            f"{neurons_per_wafer} neurons per wafer exceeds wafer capacity {capacity}",
            key="system.neurons_per_wafer",
        )
    wafers = wafers_required(neurons, neurons_per_wafer)
    coeff = DEFAULT_WHITE_MATTER_COEFFICIENT if white_matter_coefficient is None else white_matter_coefficient
    tract = fiber_tract_capacity(column, wafer, nominal_total=fiber_total)
    vol = system_volume(wafers, wafer, column, coeff)
    pw = power_report(wafers, neurons_per_wafer, power)
    return ScalingReport(
        wafer_capacity=capacity,
        vertical_links=vertical_link_count(wafer),
        edge_couplers_per_side=edge_coupler_count(wafer),
        fiber_tract_total=tract.total,
        fibers_per_wafer=tract.per_wafer,
        grey_m3=vol.grey_m3,
        white_m3=vol.white_m3,
        total_m3=vol.total_m3,
        device_w=pw.device_w,
        wallplug_w=pw.wallplug_w,
        max_span_m=max_span(f_gamma, velocity),
        neurons=int(neurons),
        neurons_per_wafer=int(neurons_per_wafer),
        wafers=wafers,
        per_wafer_w=pw.per_wafer_w,
        max_span_theta_m=max_span(f_theta, velocity),
        white_matter_coefficient=coeff,
        fiber_packing="square" if fiber_total is None else "nominal",
    )


def fig2a_rows(n_tot: Iterable[float] = DEFAULT_N_TOT, path_lengths: Iterable[float] = DEFAULT_PATH_LENGTHS):
    """Connections per node needed to hold each path length, per network size."""
    rows = []
    for L in path_lengths:
        L = int(L) if float(L).is_integer() else float(L)
        for n in n_tot:
            rows.append({"N_tot": int(round(n)), "L": L, "k": required_degree(n, L)})
    return rows


def fig2b_rows(
    k_values: Iterable[int] = DEFAULT_K, planes: Iterable[int] = DEFAULT_PLANES, wafer: WaferSpec = WaferSpec()
):
    """Wire-limited neurons per 300 mm wafer versus connections per neuron."""
    rows = []
    for p in planes:
        for k in k_values:
            spec = WaferSpec(wafer.radius, wafer.waveguide_pitch, p, k, wafer.vertical_pitch, wafer.edge_pitch)
            rows.append({"k": k, "p": p, "N_300": wafer_capacity(spec)})
    return rows


# -- formatting ------------------------------------------------------------------


def sig6(value):
    """Round floats to six significant digits; leave ints and strings alone."""
    if isinstance(value, float) and math.isfinite(value) and value != 0.0:
        return float(f"{value:.5e}")
    return value


def _cell(value) -> str:
    # integers stay exact; reals get six significant digits
    if isinstance(value, float):
        return f"{value:.5e}"
    return str(value)


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def to_json(payload) -> str:
    if isinstance(payload, dict):
        payload = {k: sig6(v) for k, v in payload.items()}
    elif isinstance(payload, list):
        payload = [{k: sig6(v) for k, v in row.items()} if isinstance(row, dict) else row for row in payload]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# -- schemas ------------------------------------------------------------------------

_INT = {"type": "integer"}
_NUM = {"type": "number"}

SCALING_REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "wafer_capacity",
        "vertical_links",
        "edge_couplers_per_side",
        "fiber_tract_total",
        "fibers_per_wafer",
        "grey_m3",
        "white_m3",
        "total_m3",
        "device_w",
        "wallplug_w",
        "max_span_m",
    ],
    "properties": {
        "wafer_capacity": _INT,
        "vertical_links": _INT,
        "edge_couplers_per_side": _INT,
        "fiber_tract_total": _INT,
        "fibers_per_wafer": _INT,
        "grey_m3": _NUM,
        "white_m3": _NUM,
        "total_m3": _NUM,
        "device_w": _NUM,
        "wallplug_w": _NUM,
        "max_span_m": _NUM,
        "neurons": _INT,
        "neurons_per_wafer": _INT,
        "wafers": _INT,
        "per_wafer_w": _NUM,
        "max_span_theta_m": _NUM,
        "white_matter_coefficient": _NUM,
        "fiber_packing": {"enum": ["square", "nominal"]},
    },
    "additionalProperties": False,
}

TOPOLOGY_STATS_SCHEMA = {
    "type": "object",
    "required": ["n_nodes", "n_edges", "avg_path_length", "disconnected_fraction", "clustering", "degree_histogram"],
    "properties": {
        "n_nodes": _INT,
        "n_edges": _INT,
        "avg_path_length": _NUM,
        "disconnected_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "clustering": {"type": "number", "minimum": 0, "maximum": 1},
        "exact": {"type": "boolean"},
        "seed": _INT,
        "kind": {"type": "string"},
        "degree_histogram": {"type": "object", "additionalProperties": _INT},
    },
    "additionalProperties": False,
}

SUMMARY_SCHEMA = {
    "type": "object",
    "required": [
        "events",
        "spikes",
        "spiking_neurons",
        "neurons",
        "photon_arrivals",
        "pulses",
        "throttled",
        "stdp_pairings",
        "photons_emitted",
        "photons_delivered",
        "photons_lost",
        "optical_energy_j",
        "electrical_energy_j",
        "end_time_ps",
    ],
    "properties": {
        "events": _INT,
        "spikes": _INT,
        "spiking_neurons": _INT,
        "neurons": _INT,
        "photon_arrivals": _INT,
        "pulses": _INT,
        "throttled": _INT,
        "stdp_pairings": _INT,
        "photons_emitted": _INT,
        "photons_delivered": _INT,
        "photons_lost": _INT,
        "optical_energy_j": _NUM,
        "electrical_energy_j": _NUM,
        "end_time_ps": _INT,
    },
    "additionalProperties": False,
}

ERROR_SCHEMA = {
    "type": "object",
    "required": ["error", "type", "message"],
    "properties": {
        "error": {"type": "string"},
        "type": {"type": "string"},
        "message": {"type": "string"},
        "key": {"type": ["string", "null"]},
    },
}

FIG2A_ROW_SCHEMA = {
    "type": "object",
    "required": list(FIG2A_COLUMNS),
    "properties": {"N_tot": _INT, "L": _NUM, "k": _INT},
    "additionalProperties": False,
}
FIG2B_ROW_SCHEMA = {
    "type": "object",
    "required": list(FIG2B_COLUMNS),
    "properties": {"k": _INT, "p": _INT, "N_300": _INT},
    "additionalProperties": False,
}
