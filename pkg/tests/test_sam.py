from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fashion_noc.sam import (
    DroppedMessageError,
    InvalidRootError,
    MsgKind,
    ProtocolMessage,
    ProtocolOrderError,
    SamState,
    World,
    classify_cut_edge,
    classify_cut_vertex,
    run_search,
    select_root,
    survey,
)
from fashion_noc.topo import (
    EmptyGraphError,
    FaultModel,
    Port,
    build_graph,
    build_mesh,
    build_torus,
    cut_elements,
    effective_graph,
    inject_faults,
    oracle_components,
)

from .conftest import ids

DATA = Path(__file__).parent / "data"


def _names(graph, nodes):
    return {graph.name(u) for u in nodes}


def _edge_names(graph, edges):
    return {frozenset((graph.name(a), graph.name(b))) for a, b in edges}


# -- root selection ------------------------------------------------------


def test_root_fault_free_mesh(mesh8):
    assert select_root(effective_graph(mesh8)) == 9


def test_root_single_node():
    g = effective_graph(build_mesh(2, 2).with_faults(nodes=[0, 1, 3]))
    assert select_root(g) == 2


def test_root_pinned(walkthrough):
    assert select_root(walkthrough, pinned=0) == 0
    assert select_root(walkthrough) == walkthrough.names.index("B")


def test_root_errors(walkthrough):
    dead = effective_graph(build_mesh(2, 2).with_faults(nodes=[0, 1, 2, 3]))
    with pytest.raises(EmptyGraphError):
        select_root(dead)
    g = effective_graph(build_mesh(2, 2).with_faults(nodes=[1]))
    with pytest.raises(InvalidRootError):
        select_root(g, pinned=1)
    with pytest.raises(InvalidRootError):
        run_search(g, 1)


# -- the 12-node walkthrough ---------------------------------------------


def test_walkthrough_golden_trace(walkthrough):
    res = run_search(walkthrough, 0, trace=True)
    golden = (DATA / "walkthrough_trace.txt").read_text().splitlines()
    assert res.trace == golden
    assert len(res.trace) == 22 == res.run.step_count
    assert res.trace[0].startswith("step=1 msg=Start from=A")
    assert res.trace[-1] == "step=22 msg=Done from=A to=A depth=0 low=0 counter=9"


def test_walkthrough_states(walkthrough):
    res = run_search(walkthrough, 0)
    depth = {walkthrough.name(u): s.depth for u, s in enumerate(res.states) if s.visited}
    low = {walkthrough.name(u): s.low for u, s in enumerate(res.states) if s.visited}
    assert depth == dict(A=0, B=1, C=2, D=3, H=4, F=2, E=3, I=4, J=5)
    # E sees A over the back edge: min(3, 0, 2) = 0
    assert low["E"] == 0 and low["I"] == low["J"] == 2
    assert low["D"] == 3 and low["H"] == 4
    assert res.run.counter == 9 == len(res.run.visit_order)
    assert len(res.run.tree_edges) == 8


def test_walkthrough_cut_elements(walkthrough):
    res = run_search(walkthrough, 0)
    assert _names(walkthrough, res.cut_vertices) == set("BCD")
    assert _edge_names(walkthrough, res.cut_edges) == {frozenset("BC"), frozenset("CD"), frozenset("DH")}
    assert set("KL") <= _names(walkthrough, res.out_of_service(walkthrough))
    # G has no usable channel at all
    assert walkthrough.degree(walkthrough.names.index("G")) == 0
    for u in ids(walkthrough, "GKL"):
        assert res.states[u].depth == res.states[u].low == walkthrough.n


def test_walkthrough_survey_finds_island_bridge(walkthrough):
    results = survey(walkthrough, 0)
    assert results[0].run.root == 0
    edges = set().union(*(r.cut_edges for r in results))
    assert _edge_names(walkthrough, edges) == {
        frozenset("BC"), frozenset("CD"), frozenset("DH"), frozenset("LK")
    }
    assert set().union(*(r.visited for r in results)) == set(walkthrough.nodes())


def test_walkthrough_d_classified_cut():
    state = SamState(depth=3, low=3, visited=True)
    assert classify_cut_vertex(state, [4])


# -- small cases ---------------------------------------------------------


def test_four_cycle():
    g = effective_graph(build_mesh(2, 2))
    res = run_search(g, 0)
    assert res.run.counter == 4
    assert len(res.run.tree_edges) == 3
    assert not res.cut_vertices and not res.cut_edges
    # the root edge into a subtree with a back edge to the root is no bridge
    assert not classify_cut_edge(True, 0, 0)


def test_isolated_root():
    g = effective_graph(build_mesh(2, 2).with_faults(nodes=[1, 2]))
    res = run_search(g, 0)
    assert res.run.counter == 1
    assert not res.run.tree_edges
    assert not res.states[0].cut


def test_classify_cut_vertex_rules():
    assert classify_cut_vertex(SamState(0, 0, root=True, visited=True), [1, 1])
    assert not classify_cut_vertex(SamState(0, 0, root=True, visited=True), [0])
    assert not classify_cut_vertex(SamState(3, 0, visited=True), [0, 2])
    with pytest.raises(ProtocolOrderError):
        classify_cut_vertex(SamState(5, 5), [])


def test_classify_cut_edge_rules():
    assert classify_cut_edge(True, 3, 4)
    assert not classify_cut_edge(False, 0, 3)
    assert not classify_cut_edge(True, 2, 2)


def test_forward_to_unvisited_sets_parent():
    g = effective_graph(build_mesh(2, 2))
    w = World(g, 0)
    msg = w.start()
    assert msg.kind is MsgKind.FORWARD and msg.receiver == 1
    reply = w.step(msg)
    assert w.states[1].depth == 1
    assert w.tables[1].parent == 0
    assert reply.sender == 1


def test_forward_to_visited_is_not_adopted():
    g = effective_graph(build_mesh(2, 2))
    w = World(g, 0)
    msg = w.start()
    while not (msg.kind is MsgKind.FORWARD and msg.receiver == 0):
        msg = w.step(msg)
    reply = w.step(msg)
    assert reply.kind is MsgKind.BACKWARD and not reply.adopted
    assert reply.value == 0
    assert w.tables[0].entries[Port.S].is_parent is False


def test_dropped_message():
    t = build_mesh(2, 2)
    g = effective_graph(t)
    w = World(g, 0)
    w.start()
    bad = ProtocolMessage(MsgKind.FORWARD, 0, 3, 0, 1)
    with pytest.raises(DroppedMessageError):
        w.step(bad)


def test_hop_latency_scales_cycles(walkthrough):
    a = run_search(walkthrough, 0)
    b = run_search(walkthrough, 0, hop_latency=3)
    assert b.run.cycles == 3 * a.run.cycles == 3 * a.run.message_count


def test_irregular_graph_triangle_with_tail():
    g = effective_graph(build_graph(4, [(0, 1), (1, 2), (2, 0), (2, 3)]))
    res = run_search(g, 0)
    assert res.cut_vertices == {2}
    assert res.cut_edges == {(2, 3)}


def test_torus_has_no_cut_elements():
    res = run_search(effective_graph(build_torus(4, 5)))
    assert not res.cut_vertices and not res.cut_edges and res.run.counter == 20


# -- properties ----------------------------------------------------------

scenarios = st.tuples(
    st.integers(0, 2**32 - 1), st.integers(10, 60), st.sampled_from(["fashion", "exfashion"])
)


def _graph(seed, count, mode, size=8):
    return effective_graph(inject_faults(build_mesh(size, size), count, FaultModel(seed=seed)), mode)


@settings(max_examples=1000, deadline=None)
@given(scenarios)
def test_oracle_equivalence(scn):
    g = _graph(*scn)
    res = run_search(g)
    comp = next(set(c) for c in oracle_components(g).components if res.run.root in c)
    cv, ce = cut_elements(g, comp)
    assert res.visited == comp
    assert res.cut_vertices == cv
    assert res.cut_edges == ce


@settings(max_examples=200, deadline=None)
@given(scenarios)
def test_tree_and_low_invariants(scn):
    g = _graph(*scn)
    res = run_search(g)
    run, st_ = res.run, res.states
    assert run.counter == len(run.visit_order) == len(res.visited)
    assert len(run.tree_edges) == run.counter - 1
    children = {v for _, v in run.tree_edges}
    assert children == res.visited - {run.root}
    for p, c in run.tree_edges:
        assert st_[c].depth == st_[p].depth + 1
        assert res.tables[c].parent == p
    assert st_[run.root].depth == 0
    for u in res.visited:
        s = st_[u]
        assert s.low <= s.depth
        parent = res.tables[u].parent
        kids = [c for p, c in run.tree_edges if p == u]
        expect = min(
            [s.depth]
            + [st_[v].depth for v in g.neighbors(u) if v != parent and v not in kids]
            + [st_[c].low for c in kids]
        )
        assert s.low == expect
        assert sum(e.is_parent for e in res.tables[u].entries) == (0 if s.root else 1)
        for e in res.tables[u].entries:
            assert not (e.is_parent and e.is_child)
            assert not e.bridge or e.valid
    usable = len(g.links())
    assert run.message_count <= usable


@settings(max_examples=50, deadline=None)
@given(scenarios)
def test_deterministic_transcript(scn):
    g = _graph(*scn)
    a = run_search(g, trace=True)
    b = run_search(g, trace=True)
    assert a.trace == b.trace and a.run == b.run


@settings(max_examples=100, deadline=None)
@given(scenarios)
def test_survey_covers_every_live_router(scn):
    g = _graph(*scn)
    results = survey(g)
    covered = [u for r in results for u in r.visited]
    assert sorted(covered) == list(g.nodes())
    r = oracle_components(g)
    first = results[0]
    if first.visited == r.gmax:
        assert first.cut_vertices == r.cut_vertices
        assert first.cut_edges == r.cut_edges
