import math
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soen.errors import ConfigError, PlacementError, WhiteMatterOverflowError
from soen.layout import (
    DEFAULT_WHITE_MATTER_COEFFICIENT,
    ColumnSpec,
    DeviceLatency,
    PodSpec,
    WaferSpec,
    all_inside_octagons,
    calibrate_white_matter_coefficient,
    edge_coupler_count,
    fiber_tract_capacity,
    grey_volume,
    in_octagon,
    keyes_capacity,
    max_span,
    octagon_area,
    octagon_side,
    path_latency,
    place_system,
    propagation_delay,
    system_volume,
    vertical_link_count,
    wafer_capacity,
    wafers_required,
)
from soen.photonics import LinkPath, Segment, link_efficiency
from soen.topology import HierarchyLevel, Topology, generate_hierarchical, generate_random

# -- capacity formulas -------------------------------------------------------------


def test_wafer_capacity_anchor():
    assert wafer_capacity(WaferSpec()) == pytest.approx(1.02e6, rel=0.01)
    assert wafer_capacity(WaferSpec()) == 1_018_233


def test_wafer_capacity_single_plane_hundred_connections():
    assert wafer_capacity(WaferSpec(planes=1, k_in=100)) == pytest.approx(2.83e6, rel=0.001)


def test_doubling_planes_quadruples_capacity():
    base = keyes_capacity(WaferSpec(planes=3))
    assert keyes_capacity(WaferSpec(planes=6)) == pytest.approx(4 * base, rel=1e-14)


@given(
    r=st.floats(0.01, 1.0),
    p=st.integers(1, 20),
    w=st.floats(1e-7, 1e-5),
    k=st.integers(1, 10**4),
    s=st.integers(2, 5),
)
def test_capacity_scale_covariance(r, p, w, k, s):
    base = keyes_capacity(WaferSpec(radius=r, waveguide_pitch=w, planes=p, k_in=k))
    assert keyes_capacity(WaferSpec(radius=s * r, waveguide_pitch=w, planes=p, k_in=k)) == pytest.approx(
        s * s * base, rel=1e-12
    )
    assert keyes_capacity(WaferSpec(radius=r, waveguide_pitch=w, planes=s * p, k_in=k)) == pytest.approx(
        s * s * base, rel=1e-12
    )
    assert keyes_capacity(WaferSpec(radius=r, waveguide_pitch=s * w, planes=p, k_in=k)) == pytest.approx(
        base / (s * s), rel=1e-12
    )
    assert keyes_capacity(WaferSpec(radius=r, waveguide_pitch=w, planes=p, k_in=s * k)) == pytest.approx(
        base / (s * s), rel=1e-12
    )


def test_vertical_links():
    assert vertical_link_count(WaferSpec()) == pytest.approx(1.02e8, rel=0.01)
    assert vertical_link_count(WaferSpec(vertical_pitch=50e-6)) == pytest.approx(2.55e7, rel=0.01)
    assert vertical_link_count(WaferSpec(vertical_pitch=50e-6)) == vertical_link_count(WaferSpec()) // 4


def test_edge_couplers():
    assert octagon_side(0.15) == pytest.approx(0.1148, abs=1e-4)
    assert edge_coupler_count(WaferSpec(edge_pitch=10e-6)) == 11_480
    assert edge_coupler_count(WaferSpec(edge_pitch=20e-6)) == 5_740
    assert edge_coupler_count(WaferSpec(edge_pitch=5e-6)) == 22_961


def test_fiber_tract():
    tract = fiber_tract_capacity()
    assert tract.total == pytest.approx(8.4e5, rel=0.01)
    assert tract.packing == "square"
    assert fiber_tract_capacity(nominal_total=10**6).per_wafer == 166_666
    double = fiber_tract_capacity(ColumnSpec(fiber_diameter=250e-6))
    assert double.total == pytest.approx(tract.total / 4, rel=1e-4)


def test_spec_validation_keys():
    for kwargs, key in [
        ({"waveguide_pitch": -1}, "wafer.waveguide_pitch"),
        ({"planes": 0}, "wafer.planes"),
        ({"radius": 0}, "wafer.radius"),
    ]:
        with pytest.raises(ConfigError) as exc:
            WaferSpec(**kwargs)
        assert exc.value.key == key
    with pytest.raises(ConfigError):
        ColumnSpec(wafers_per_column=0)
    with pytest.raises(ConfigError):
        PodSpec(columns_per_row=0)


# -- sizing, spans and volume --------------------------------------------------


def test_max_span():
    assert max_span(20e6, 2e8) == 10.0
    assert max_span(1e6, 2e8) == 200.0
    assert max_span(10e6) == 2 * max_span(20e6)
    with pytest.raises(ConfigError):
        max_span(0)


def test_wafers_required():
    assert wafers_required(10**10, 10**6) == 10_000
    assert wafers_required(10**6 + 1, 10**6) == 2
    assert wafers_required(0, 10) == 0


def test_volume():
    assert system_volume(0).total_m3 == 0.0
    assert grey_volume(10**4, WaferSpec(), ColumnSpec()) == pytest.approx(6.36, rel=0.01)
    v = system_volume(10**4)
    assert v.total_m3 == pytest.approx(8.0, rel=1e-12)
    assert DEFAULT_WHITE_MATTER_COEFFICIENT == pytest.approx(0.139, rel=0.01)
    with pytest.raises(ConfigError):
        calibrate_white_matter_coefficient(target_total_m3=1.0)


def test_white_matter_exponent():
    c = 0.2
    a = system_volume(100, white_matter_coefficient=c).white_m3
    b = system_volume(800, white_matter_coefficient=c).white_m3
    assert b / a == pytest.approx(8 ** (4 / 3))


# -- latency -------------------------------------------------------------------------


def test_path_latency_examples():
    assert path_latency(LinkPath(), latency=DeviceLatency(0, 0, 0)) == 0.0
    fiber = LinkPath((Segment("fiber", 2.0),))
    assert path_latency(fiber, latency=DeviceLatency(0, 0, 0)) == pytest.approx(10e-9, rel=1e-3)
    vert = LinkPath((Segment("free_space_vertical", 300e-6),))
    assert path_latency(vert, latency=DeviceLatency(0, 0, 0)) == pytest.approx(1e-12, rel=1e-3)


segments = st.builds(
    Segment,
    st.sampled_from(["waveguide", "fiber", "free_space_vertical", "edge_coupler"]),
    st.floats(0, 100),
    st.integers(0, 3),
)


@given(a=st.lists(segments, max_size=5), b=st.lists(segments, max_size=5))
def test_latency_additive_and_positive(a, b):
    zero = DeviceLatency(0, 0, 0)
    pa, pb = LinkPath(tuple(a)), LinkPath(tuple(b))
    la, lb = path_latency(pa, latency=zero), path_latency(pb, latency=zero)
    assert path_latency(pa + pb, latency=zero) == pytest.approx(la + lb, rel=1e-12, abs=1e-30)
    if pa.length > 0:
        assert la > 0


# -- placement ----------------------------------------------------------------------


def test_single_neuron_at_centre():
    lay = place_system(Topology.from_edges(1, []))
    assert np.allclose(lay.positions[0], 0.0)
    assert lay.paths == ()


def test_two_stacked_wafers_use_one_vertical_segment():
    t = Topology.from_edges(2, [(0, 1)])
    lay = place_system(t, neurons_per_wafer=1)
    assert lay.level.tolist() == [0, 1]
    (path,) = lay.paths
    assert path.segments == (Segment("free_space_vertical", ColumnSpec().wafer_spacing, 0),)
    assert lay.routes == ("vertical",)


def test_placement_inside_octagons_and_deterministic():
    t = generate_random(3000, 5, seed=2)
    pods = PodSpec(columns_per_row=2)
    a = place_system(t, column=ColumnSpec(wafers_per_column=3), pods=pods, neurons_per_wafer=250)
    b = place_system(t, column=ColumnSpec(wafers_per_column=3), pods=pods, neurons_per_wafer=250, seed=7)
    assert all_inside_octagons(a)
    assert np.array_equal(a.positions, b.positions)
    assert a.paths == b.paths
    assert a.n_wafers == 12
    assert a.n_columns == 4


def test_in_octagon_boundaries():
    r = 1.0
    a = r * math.cos(math.pi / 8)
    assert in_octagon(0.0, 0.0, r)
    assert in_octagon(a, 0.0, r)
    assert not in_octagon(a * 1.01, 0.0, r)
    assert not in_octagon(0.9 * a, 0.9 * a, r)
    # octagon area from the inequality description matches the closed form
    g = np.linspace(-1, 1, 1001)
    x, y = np.meshgrid(g, g)
    frac = in_octagon(x, y, r).mean()
    assert frac * 4 == pytest.approx(octagon_area(r), rel=0.01)


def test_overfull_wafer():
    t = generate_random(10, 2, seed=1)
    with pytest.raises(PlacementError):
        place_system(t, neurons_per_wafer=2, n_wafers=3)
    with pytest.raises(PlacementError):
        place_system(t, neurons_per_wafer=wafer_capacity(WaferSpec()) + 1)


def _two_column_system(use_edge_couplers):
    # 1% of each node's edges leave its 5000-neuron column
    levels = [HierarchyLevel(5000, 99, 1), HierarchyLevel(2)]
    t = generate_hierarchical(levels, seed=3)
    return t, place_system(
        t,
        column=ColumnSpec(wafers_per_column=5),
        pods=PodSpec(columns_per_row=2),
        neurons_per_wafer=1000,
        use_edge_couplers=use_edge_couplers,
    )


def test_two_column_routing_audit():
    t0 = time.perf_counter()
    t, lay = _two_column_system(use_edge_couplers=False)
    inter = lay.column[t.src] != lay.column[t.dst]
    routes = np.array(lay.routes)
    assert inter.mean() == pytest.approx(0.01)
    assert np.all(routes[inter] == "fiber")
    assert set(routes[~inter]) <= {"local", "vertical"}
    share = fiber_tract_capacity(ColumnSpec(wafers_per_column=5)).per_wafer
    assert max(lay.fiber_demand.values()) <= share
    assert sum(lay.fiber_demand.values()) == len({(s, lay.column[d]) for s, d in zip(t.src[inter], t.dst[inter])})
    assert all_inside_octagons(lay)
    assert time.perf_counter() - t0 < 120


def test_edge_couplers_serve_same_level_neighbours():
    t = Topology.from_edges(4, [(0, 2), (0, 3)])
    lay = place_system(
        t, column=ColumnSpec(wafers_per_column=2), pods=PodSpec(columns_per_row=2), neurons_per_wafer=1
    )
    # neurons 0,1 in column 0 (levels 0,1); 2,3 in column 1 (levels 0,1)
    assert lay.routes == ("edge_coupler", "fiber")
    assert [s.medium for s in lay.paths[0].segments] == ["waveguide", "edge_coupler", "waveguide"]
    fiber = lay.paths[1].segments[1]
    assert fiber.medium == "fiber"
    assert fiber.taps == 2


def test_fiber_overflow():
    t = Topology.from_edges(4, [(0, 2), (1, 3)])
    with pytest.raises(WhiteMatterOverflowError):
        place_system(
            t,
            column=ColumnSpec(wafers_per_column=1),
            pods=PodSpec(columns_per_row=2),
            neurons_per_wafer=2,
            fiber_total=0,
            use_edge_couplers=False,
        )


def test_edge_delays_follow_layout_only():
    t = generate_random(40, 3, seed=0)
    lay = place_system(t, neurons_per_wafer=10, column=ColumnSpec(wafers_per_column=2), pods=PodSpec(2))
    d1 = lay.edge_delays()
    d2 = lay.edge_delays()
    assert np.array_equal(d1, d2)
    assert np.all(d1 >= DeviceLatency().total)
    i = 5
    assert path_latency(lay, (int(t.src[i]), int(t.dst[i]))) == d1[i]
    with pytest.raises(KeyError):
        lay.edge_index((0, 0))


def test_vectorized_link_properties_match_paths():
    t = generate_random(400, 6, seed=8)
    lay = place_system(
        t,
        column=ColumnSpec(wafers_per_column=2),
        pods=PodSpec(columns_per_row=2),
        neurons_per_wafer=40,
        detector_efficiency=0.7,
    )
    counts = lay.route_counts()
    assert all(counts[r] > 0 for r in ("local", "vertical", "edge_coupler", "fiber"))
    eff = np.array([link_efficiency(p) for p in lay.paths])
    delay = np.array([propagation_delay(p) for p in lay.paths])
    assert np.allclose(lay.link_efficiencies(), eff, rtol=1e-12, atol=0)
    assert np.allclose(lay.propagation_delays(), delay, rtol=1e-12, atol=0)
