import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fashion_noc.reconfig import TurnTables, build_routing_tables
from fashion_noc.router import Network, RouterConfig
from fashion_noc.sim import (
    CAMPAIGN_HEADER,
    SIM_HEADER,
    FaultEvent,
    Scheme,
    TrafficKind,
    TrafficPattern,
    build_network,
    connectivity_campaign,
    destination,
    generate_traffic,
    mean_ci,
    metrics_csv,
    run_simulation,
    trial_seed,
)
from fashion_noc.topo import FaultModel, Mode, build_mesh, effective_graph, inject_faults

# -- traffic -----------------------------------------------------------------


def test_transpose_partner():
    assert destination(TrafficKind.TRANSPOSE, 2 * 8 + 5, 8, 8) == 5 * 8 + 2
    assert destination(TrafficKind.TRANSPOSE, 9, 8, 8) == 9


def test_transpose_non_square():
    assert destination(TrafficKind.TRANSPOSE, 0 * 6 + 5, 4, 6) is None


def test_bitcomp_partner():
    assert destination(TrafficKind.BITCOMP, 0, 8, 8) == 63
    assert destination(TrafficKind.BITCOMP, 0b101010, 8, 8) == 0b010101


@given(st.integers(0, 63))
def test_permutations_are_involutions(u):
    for kind in (TrafficKind.TRANSPOSE, TrafficKind.BITCOMP):
        assert destination(kind, destination(kind, u, 8, 8), 8, 8) == u


def test_uniform_needs_a_second_node():
    rng = np.random.default_rng(0)
    pat = TrafficPattern("uniform", 1.0, packet_size=1)
    assert generate_traffic(pat, 3, 0, rng, gmax=[3], rows=2, cols=2) is None
    pkt = generate_traffic(pat, 3, 0, rng, gmax=[0, 3], rows=2, cols=2)
    assert pkt.src == 3 and pkt.dst == 0


def test_generate_traffic_rate_and_spread():
    rng = np.random.default_rng(1)
    pat = TrafficPattern("uniform", 0.4)
    got = [generate_traffic(pat, 0, c, rng, gmax=range(64), rows=8, cols=8) for c in range(40000)]
    pkts = [p for p in got if p]
    assert abs(len(pkts) / 40000 - 0.05) < 0.005
    assert {p.dst for p in pkts} == set(range(1, 64))


def test_pattern_validation():
    with pytest.raises(ValueError):
        TrafficPattern("uniform", -0.1)
    with pytest.raises(ValueError):
        TrafficPattern("nope", 0.1)


# -- simulation --------------------------------------------------------------

MESH = build_mesh(8, 8)


def test_zero_rate_zero_throughput():
    m = run_simulation(MESH, "fashion", TrafficPattern("uniform", 0.0), 3000, 1000)
    assert m.throughput == 0 and m.delivered_packets == 0 and m.avg_latency == 0


def test_low_load_accepts_offered_load():
    m = run_simulation(MESH, "fashion", TrafficPattern("uniform", 0.05), 20000, 4000, seed=3)
    assert abs(m.throughput_per_node - 0.05) < 0.005
    assert m.delivered_packets >= 0.98 * m.injected_packets


@pytest.mark.parametrize("scheme", list(Scheme))
def test_simulation_is_deterministic(scheme):
    topo = inject_faults(MESH, 10, FaultModel(seed=4))
    a = run_simulation(topo, scheme, TrafficPattern("uniform", 0.05), 6000, 1000, seed=7)
    b = run_simulation(topo, scheme, TrafficPattern("uniform", 0.05), 6000, 1000, seed=7)
    assert a == b


def test_seed_changes_traffic():
    a = run_simulation(MESH, "fashion", TrafficPattern("uniform", 0.05), 6000, 1000, seed=1)
    b = run_simulation(MESH, "fashion", TrafficPattern("uniform", 0.05), 6000, 1000, seed=2)
    assert a != b


def test_permutation_traffic_runs():
    for kind in ("transpose", "bitcomp"):
        m = run_simulation(MESH, "updown", TrafficPattern(kind, 0.05), 6000, 1000, seed=1)
        assert m.delivered_packets > 0
    # the 8 diagonal routers of a transpose talk to themselves and stay quiet
    m = run_simulation(MESH, "fashion", TrafficPattern("transpose", 0.05), 6000, 1000, seed=1)
    assert m.skipped_packets > 0


def test_latency_close_to_unrestricted_at_low_load():
    """Turn restrictions cost little when the network is nearly empty."""
    rate = 0.01
    m = run_simulation(MESH, "fashion", TrafficPattern("uniform", rate), 30000, 5000, seed=5)
    # same traffic on all-permitted minimal routing
    g = effective_graph(MESH)
    free = TurnTables({u: set() for u in g.nodes()})
    net = Network(g, free, build_routing_tables(g, free), RouterConfig())
    ref_m = _replay(net, rate, seed=5, cycles=30000, warmup=5000)
    assert abs(m.avg_latency - ref_m) <= 2.0


def _replay(net, rate, seed, cycles, warmup):
    from fashion_noc.sim import _arrivals, _assign_destinations

    rng = np.random.default_rng(seed)
    src, gen = _arrivals(rng, rate / 8, range(64), cycles)
    order = np.lexsort((src, gen))
    src, gen = src[order], gen[order]
    dst = _assign_destinations(TrafficKind.UNIFORM, src, rng.random(len(src)), range(64), 8, 8)
    net.load_packets(src, dst, gen, 8)
    net.run(cycles)
    ok = (gen >= warmup) & (net.pk_done >= 0)
    return float((net.pk_done - gen)[ok].mean())


def test_fault_schedule_accounting():
    pat = TrafficPattern("uniform", 0.05)
    schedule = [FaultEvent(4000, "link", (27, 28)), FaultEvent(8000, "node", (36,))]
    m = run_simulation(MESH, "fashion", pat, 14000, 2000, schedule, seed=2)
    assert len(m.reconfig_cycles) == 2 and all(c > 0 for c in m.reconfig_cycles)
    assert m.retransmitted_packets > 0
    assert m.nodes == 63
    base = run_simulation(MESH, "fashion", pat, 14000, 2000, seed=2)
    assert m.delivered_packets < base.delivered_packets


def test_fault_isolating_a_router_loses_its_traffic():
    topo = MESH
    schedule = [FaultEvent(3000, "link", (0, 1)), FaultEvent(3000, "link", (0, 8))]
    m = run_simulation(topo, "updown", TrafficPattern("uniform", 0.1), 8000, 1000, schedule, seed=3)
    assert m.nodes == 63 and m.lost_packets > 0


def test_fault_event_validation():
    with pytest.raises(ValueError):
        FaultEvent(0, "gremlin", (1,)).apply(MESH)
    with pytest.raises(ValueError):
        run_simulation(MESH, "fashion", TrafficPattern("uniform", 0.1), 100, 100)


def test_updown_reconfig_cycles_are_one_search():
    g = effective_graph(MESH)
    _, _, rc_u = build_network(g, "updown")
    _, _, rc_f = build_network(g, "fashion")
    # links() lists both directions: one forward and one backward message each
    assert rc_u == len(g.links()) + 1
    assert rc_f > rc_u


def test_exfashion_default_router():
    net, _, _ = build_network(effective_graph(MESH, Mode.EXFASHION), "exfashion")
    assert net.config.unified and net.config.bidirectional


def test_metrics_csv_header_and_format():
    m = run_simulation(MESH, "updown", TrafficPattern("uniform", 0.02), 2000, 500, seed=1)
    text = metrics_csv([("updown", "uniform", 0.02, 0, 1, m)])
    lines = text.split("\n")
    assert lines[0] == SIM_HEADER and lines[-1] == "" and "\r" not in text
    row = next(csv.DictReader(io.StringIO(text)))
    assert row["scheme"] == "updown" and row["rate"] == "0.0200"


# -- connectivity campaign -------------------------------------------------------


def test_campaign_zero_faults():
    res = connectivity_campaign((8, 8), [0], trials=5, turns=True)
    row = res.row(0)
    assert row.avg_cut_elements == 0 and row.pct_fully_connected == 100.0
    assert row.avg_dropped_nodes == 0
    assert row.forbidden_fashion == pytest.approx(98 / 584)


def test_campaign_csv():
    text = connectivity_campaign((4, 4), [2, 4], trials=10, seed=3).to_csv()
    lines = text.splitlines()
    assert lines[0] == CAMPAIGN_HEADER and len(lines) == 3
    assert lines[1].startswith("2,10,")
    assert connectivity_campaign((4, 4), [2, 4], trials=10, seed=3).to_csv() == text


def test_campaign_exfashion_dominates():
    f = connectivity_campaign((8, 8), [30], 200, "fashion", seed=1).row(30)
    e = connectivity_campaign((8, 8), [30], 200, "exfashion", seed=1).row(30)
    assert e.avg_dropped_nodes <= f.avg_dropped_nodes
    assert e.fully_connected_fraction >= f.fully_connected_fraction
    assert e.avg_cut_elements <= f.avg_cut_elements


def test_campaign_rejects_zero_trials():
    with pytest.raises(ValueError):
        connectivity_campaign((4, 4), [1], 0)


def test_trial_seed_independent_of_order():
    assert trial_seed(1, 30, 5) == trial_seed(1, 30, 5)
    assert len({trial_seed(1, f, t) for f in (10, 20) for t in range(100)}) == 200


@settings(max_examples=30)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_mean_ci_brackets_mean(xs):
    m, lo, hi = mean_ci(xs)
    assert lo <= m <= hi
    assert m == pytest.approx(np.mean(xs), abs=1e-9)


def test_prefaulted_topology_reports_its_reconfiguration():
    topo = inject_faults(MESH, 10, FaultModel(seed=1))
    m = run_simulation(topo, "fashion", TrafficPattern("uniform", 0.02), 2000, 500, seed=1)
    g = effective_graph(topo)
    assert m.reconfig_cycles == [build_network(g, "fashion")[2]]
    clean = run_simulation(MESH, "fashion", TrafficPattern("uniform", 0.02), 2000, 500, seed=1)
    assert clean.reconfig_cycles == []
