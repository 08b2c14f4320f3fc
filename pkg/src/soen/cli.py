"""Command-line scenario runner.

    soen <command> [--config FILE] [--seed N] [--out DIR] [--format csv|json]

Every run writes its artifacts plus a normalized ``scenario.yaml`` into the
output directory. Module errors exit with status 1 and a JSON error record
on stderr (also saved as ``error.json``).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import reports
from .config import COMMANDS, ScenarioConfig, load_config, serialize, validate
from .engine import Network, poisson_stimulus, read_events, run
from .errors import SoenError
from .layout import place_system
from .topology import (
    Topology,
    generate_hierarchical,
    generate_random,
    generate_small_world,
    graph_metrics,
)


@dataclasses.dataclass
class ScenarioResult:
    status: int
    artifacts: dict  # file name -> path
    error: Optional[dict] = None


def _derived_seed(seed: int, stream: int) -> int:
    # independent streams for topology and stimulus from one user seed
    return int(np.random.SeedSequence([seed, stream]).generate_state(1, np.uint64)[0])


def build_topology(config: ScenarioConfig) -> Topology:
    t = config.topology
    weight = config.devices.synapse.weight if t.weight is None else t.weight
    seed = config.seed
    if t.kind == "random":
        return generate_random(t.n, t.k, seed, weight)
    if t.kind == "small_world":
        return generate_small_world(t.n, t.k, t.beta, seed, weight)
    if t.kind == "hierarchical":
        return generate_hierarchical(t.levels, seed, weight)
    return Topology.read(t.file)


def build_stimulus(config: ScenarioConfig, n: int):
    s = config.simulate
    if s.stimulus_file:
        return read_events(Path(s.stimulus_file).read_text(encoding="ascii"))
    return poisson_stimulus(n, s.stimulus_rate, s.t_end, _derived_seed(config.seed, 1))


def _fmt(config: ScenarioConfig, default: str) -> str:
    return config.format or default


def _write(out: Path, name: str, text: str, artifacts: dict) -> None:
    path = out / name
    path.write_text(text, encoding="utf-8")
    artifacts[name] = str(path)


def _rows_json(rows) -> str:
    return reports.to_json(rows)


def _do_fig2a(config, out, artifacts):
    rows = reports.fig2a_rows(config.fig2a.n_tot, config.fig2a.path_lengths)
    if _fmt(config, "csv") == "csv":
        _write(out, "fig2a.csv", reports.to_csv(rows, reports.FIG2A_COLUMNS), artifacts)
    else:
        _write(out, "fig2a.json", _rows_json(rows), artifacts)


def _do_fig2b(config, out, artifacts):
    rows = reports.fig2b_rows(config.fig2b.k, config.fig2b.planes, config.wafer)
    if _fmt(config, "csv") == "csv":
        _write(out, "fig2b.csv", reports.to_csv(rows, reports.FIG2B_COLUMNS), artifacts)
    else:
        _write(out, "fig2b.json", _rows_json(rows), artifacts)


def _do_scaling(config, out, artifacts):
    s = config.system
    rep = reports.scaling_report(
        neurons=s.neurons,
        neurons_per_wafer=s.neurons_per_wafer,
        wafer=config.wafer,
        column=config.column,
        power=config.power_model(),
        white_matter_coefficient=s.white_matter_coefficient,
        fiber_total=config.layout.fiber_total,
        velocity=s.velocity,
        f_gamma=s.f_gamma,
        f_theta=s.f_theta,
    )
    d = rep.to_dict()
    if _fmt(config, "json") == "json":
        _write(out, "scaling_report.json", reports.to_json(d), artifacts)
    else:
        _write(out, "scaling_report.csv", reports.to_csv([d], list(d)), artifacts)


def _do_topology(config, out, artifacts):
    topo = build_topology(config)
    metrics = graph_metrics(topo, config.topology.sample_size, _derived_seed(config.seed, 2))
    d = metrics.to_dict()
    d["seed"] = config.seed
    d["kind"] = config.topology.kind
    if _fmt(config, "json") == "json":
        _write(out, "topology_stats.json", reports.to_json(d), artifacts)
    else:
        flat = {k: v for k, v in d.items() if k != "degree_histogram"}
        _write(out, "topology_stats.csv", reports.to_csv([flat], list(flat)), artifacts)
    _write(out, "topology.txt", topo.to_text(), artifacts)


def _do_simulate(config, out, artifacts):
    topo = build_topology(config)
    lay = config.layout
    ph = config.photonics
    layout = place_system(
        topo,
        config.wafer,
        config.column,
        lay.pods,
        neurons_per_wafer=lay.neurons_per_wafer,
        detector_efficiency=ph.detector_efficiency,
        use_edge_couplers=lay.use_edge_couplers,
        fiber_total=lay.fiber_total,
        indices=ph.indices,
    )
    network = Network.from_layout(layout, config.neuron_params(), ph.losses, ph.safety)
    stimulus = build_stimulus(config, topo.n_nodes)
    log = run(
        network,
        stimulus,
        config.simulate.t_end,
        seed=config.seed,
        delivery=ph.delivery,
        stimulus_latency=config.simulate.stimulus_latency,
    )
    _write(out, "events.txt", log.to_text(), artifacts)
    _write(out, "summary.json", reports.to_json(log.summary()), artifacts)
    _write(out, "topology.txt", topo.to_text(), artifacts)


_HANDLERS = {
    "fig2a": _do_fig2a,
    "fig2b": _do_fig2b,
    "scaling-report": _do_scaling,
    "topology-stats": _do_topology,
    "simulate": _do_simulate,
}


def _error_record(exc: BaseException) -> dict:
    if isinstance(exc, SoenError):
        return exc.to_dict()
    return {"error": "io", "type": type(exc).__name__, "message": str(exc), "key": None}


def run_scenario(config: ScenarioConfig, out: Optional[Path] = None) -> ScenarioResult:
    """Execute ``config.command``; returns exit status and written artifacts."""
    out = Path(config.output if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: dict = {}
    try:
        _write(out, "scenario.yaml", serialize(config), artifacts)
        _HANDLERS[config.command](config, out, artifacts)
    except (SoenError, OSError) as exc:
        err = _error_record(exc)
        _write(out, "error.json", json.dumps(err, indent=2, sort_keys=True) + "\n", artifacts)
        return ScenarioResult(1, artifacts, err)
    return ScenarioResult(0, artifacts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="soen", description="Optoelectronic network scaling and simulation runner.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="overrides the config's command")
    p.add_argument("--config", help="YAML scenario file")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"))
    return p


def resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if args.command:
        changes["command"] = args.command
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out:
        changes["output"] = args.out
    if args.format:
        changes["format"] = args.format
    return validate(dataclasses.replace(config, **changes))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except (SoenError, OSError) as exc:
        err = _error_record(exc)
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(json.dumps(err, indent=2, sort_keys=True) + "\n")
        return 1
    result = run_scenario(config)
    if result.error is not None:
        print(json.dumps(result.error, sort_keys=True), file=sys.stderr)
        return 1
    for name in sorted(result.artifacts):
        print(result.artifacts[name])
    return 0


if __name__ == "__main__":
    sys.exit(main())
