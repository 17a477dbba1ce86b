from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fashion_noc.topo import (
    EmptyGraphError,
    FaultExhaustionError,
    FaultModel,
    InvalidDimensionError,
    Mode,
    Port,
    ScenarioError,
    build_graph,
    build_mesh,
    build_torus,
    components,
    cut_elements,
    degree_stats,
    dump_scenario,
    effective_graph,
    inject_faults,
    load_scenario,
    oracle_components,
)

from .conftest import ids


def test_mesh_8x8_counts(mesh8):
    assert mesh8.n == 64
    assert len(mesh8.links) == 224
    assert len(mesh8.channels) == 112


def test_mesh_2x2_smallest():
    m = build_mesh(2, 2)
    g = effective_graph(m)
    assert len(m.links) == 8
    assert {g.degree(u) for u in range(4)} == {2}


def test_mesh_16x16_links():
    assert len(build_mesh(16, 16).links) == 2 * (2 * 16 * 15)


@pytest.mark.parametrize("n", range(2, 33))
def test_mesh_link_formula(n):
    assert len(build_mesh(n, n).links) == 4 * n * (n - 1)


def test_mesh_ports_follow_coordinates(mesh8):
    u = 3 * 8 + 4
    assert mesh8.ports[u][Port.N] == 2 * 8 + 4
    assert mesh8.ports[u][Port.S] == 4 * 8 + 4
    assert mesh8.ports[u][Port.E] == 3 * 8 + 5
    assert mesh8.ports[u][Port.W] == 3 * 8 + 3
    assert mesh8.ports[0][Port.N] == -1 and mesh8.ports[0][Port.W] == -1


@pytest.mark.parametrize("dims", [(1, 4), (0, 0), (5, 1)])
def test_mesh_rejects_small(dims):
    with pytest.raises(InvalidDimensionError):
        build_mesh(*dims)


def test_torus_4x4():
    t = build_torus(4, 4)
    assert t.n == 16
    assert len(t.links) == 64


def test_torus_3x3_regular():
    g = effective_graph(build_torus(3, 3))
    assert all(g.degree(u) == 4 for u in range(9))


def test_torus_2x2_rejected():
    with pytest.raises(InvalidDimensionError):
        build_torus(2, 2)


def test_zero_faults_unchanged(mesh8):
    assert inject_faults(mesh8, 0, FaultModel(seed=3)) == mesh8


def test_fault_injection_deterministic(mesh8):
    a = inject_faults(mesh8, 50, FaultModel(seed=11))
    b = inject_faults(mesh8, 50, FaultModel(seed=11))
    assert a == b
    assert a.fault_count == 50
    assert inject_faults(mesh8, 50, FaultModel(seed=12)) != a


def test_fault_ratio_24_to_1(mesh8):
    routers = links = 0
    for seed in range(400):
        t = inject_faults(mesh8, 25, FaultModel(seed=seed))
        routers += len(t.faulty_nodes)
        links += len(t.faulty_links)
    # 10000 draws, binomial sd of the router count is about 19.6
    assert routers + links == 400 * 25
    assert abs(routers - 400) < 5 * 19.6


def test_router_fault_kills_incident_links():
    m = build_mesh(3, 3)
    t = m.with_faults(nodes=[4])
    g = effective_graph(t)
    assert not g.alive[4]
    for v in (1, 3, 5, 7):
        assert t.link_faulty(4, v) and t.link_faulty(v, 4)
        assert g.degree(v) == 2


def test_fault_exhaustion():
    m = build_mesh(2, 2)
    with pytest.raises(FaultExhaustionError):
        inject_faults(m, 13, FaultModel())
    full = inject_faults(m, 6, FaultModel(seed=1, router_weight=1e-9))
    assert len(full.faulty_links) == 6


def test_fault_model_validation():
    with pytest.raises(ValueError):
        FaultModel(link_weight=0)
    with pytest.raises(ValueError):
        FaultModel(buffer_fraction=1.5)


def test_unidirectional_fault_modes():
    t = build_mesh(3, 4).with_faults(links=[(7, 11)])
    fashion = effective_graph(t, Mode.FASHION)
    ex = effective_graph(t, Mode.EXFASHION)
    assert not fashion.has_channel(7, 11)
    assert ex.has_channel(7, 11) and ex.has_channel(11, 7)
    assert ex.half[(7, 11)] == (11, 7)


def test_all_healthy_modes_identical(mesh8):
    a = effective_graph(mesh8, "fashion")
    b = effective_graph(mesh8, "exfashion")
    assert a.ports == b.ports and not b.half


def test_buffer_faults_masked_only_in_exfashion():
    t = build_mesh(3, 3).with_faults(buffers=[(0, 1)])
    assert not effective_graph(t, "fashion").has_channel(0, 1)
    ex = effective_graph(t, "exfashion")
    assert ex.has_channel(0, 1) and not ex.half


def test_oracle_fault_free_mesh(mesh8):
    r = oracle_components(effective_graph(mesh8))
    assert len(r.components) == 1
    assert r.cut_vertices == frozenset() and r.cut_edges == frozenset()
    assert r.dropped == 0 and r.fully_connected


def test_oracle_walkthrough(walkthrough):
    r = oracle_components(walkthrough)
    assert r.gmax == ids(walkthrough, "ABCDEFHIJ")
    assert r.cut_vertices == ids(walkthrough, "BCD")
    named = {frozenset((walkthrough.name(a), walkthrough.name(b))) for a, b in r.cut_edges}
    assert named == {frozenset("BC"), frozenset("CD"), frozenset("DH")}
    kl = [c for c in r.components if set(c) == ids(walkthrough, "KL")]
    assert kl
    # the K-L island has its own bridge
    _, ce = cut_elements(walkthrough, kl[0])
    assert {frozenset(walkthrough.name(x) for x in e) for e in ce} == {frozenset("KL")}


def test_oracle_path_graph():
    g = effective_graph(build_graph(4, [(0, 1), (1, 2), (2, 3)]))
    r = oracle_components(g)
    assert r.cut_vertices == {1, 2}
    assert len(r.cut_edges) == 3


def test_gmax_tie_breaks_to_lowest_id():
    g = effective_graph(build_graph(4, [(2, 3), (0, 1)]))
    assert oracle_components(g).gmax == {0, 1}


def test_degree_stats(mesh8):
    s = degree_stats(effective_graph(mesh8))
    assert (s.minimum, s.maximum, s.average) == (2, 4, Fraction(224, 64))
    s = degree_stats(effective_graph(build_torus(4, 4)))
    assert s.minimum == s.maximum == s.average == 4
    single = effective_graph(build_mesh(2, 2).with_faults(nodes=[1, 2, 3]))
    assert degree_stats(single).average == 0
    with pytest.raises(EmptyGraphError):
        degree_stats(effective_graph(build_mesh(2, 2).with_faults(nodes=[0, 1, 2, 3])))


def _nx(graph):
    G = nx.Graph()
    G.add_nodes_from(graph.nodes())
    G.add_edges_from(graph.edges())
    return G


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), count=st.integers(0, 60), mode=st.sampled_from(list(Mode)))
def test_oracle_matches_networkx(seed, count, mode):
    g = effective_graph(inject_faults(build_mesh(6, 6), count, FaultModel(seed=seed)), mode)
    r = oracle_components(g)
    G = _nx(g)
    assert sorted(map(tuple, map(sorted, nx.connected_components(G)))) == sorted(r.components)
    H = G.subgraph(r.gmax)
    assert r.cut_vertices == set(nx.articulation_points(H))
    assert r.cut_edges == {tuple(sorted(e)) for e in nx.bridges(H)}


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), count=st.integers(0, 60))
def test_cut_vertex_removal_increases_components(seed, count):
    g = effective_graph(inject_faults(build_mesh(6, 6), count, FaultModel(seed=seed)))
    r = oracle_components(g)
    for u in r.gmax:
        rest = g.subgraph(r.gmax - {u})
        assert (len(components(rest)) > 1) == (u in r.cut_vertices)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), count=st.integers(1, 80))
def test_exfashion_superset(seed, count):
    t = inject_faults(build_mesh(8, 8), count, FaultModel(seed=seed))
    f = effective_graph(t, "fashion")
    e = effective_graph(t, "exfashion")
    assert set(f.edges()) <= set(e.edges())
    assert len(oracle_components(e).gmax) >= len(oracle_components(f).gmax)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_components_independent_of_enumeration(seed):
    g = effective_graph(inject_faults(build_mesh(6, 6), 30, FaultModel(seed=seed)))
    G = _nx(g)
    order = list(reversed(g.nodes()))
    seen, comps = set(), []
    for s in order:
        if s not in seen:
            c = nx.node_connected_component(G, s)
            seen |= c
            comps.append(tuple(sorted(c)))
    assert sorted(comps) == sorted(components(g))


def test_scenario_roundtrip(mesh8):
    t = inject_faults(mesh8, 40, FaultModel(seed=5, buffer_fraction=0.3))
    assert load_scenario(dump_scenario(t)) == t


def test_scenario_names(walkthrough_topo):
    assert walkthrough_topo.name(0) == "A"
    assert (walkthrough_topo.node_id("J"), walkthrough_topo.node_id("K")) in walkthrough_topo.faulty_links


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("mesh 4 4\nlinkfault 0 5\n", 2),
        ("linkfault 0 1\n", 1),
        ("mesh 4 4\n\nfrobnicate 1\n", 3),
        ("mesh 1 4\n", 1),
        ("mesh 4 4\nnodefault 99\n", 2),
    ],
)
def test_scenario_errors_carry_line(text, lineno):
    with pytest.raises(ScenarioError) as exc:
        load_scenario(text)
    assert exc.value.lineno == lineno
