"""Detection and reconfiguration on the 12-router walkthrough network.

A 3x4 mesh named A..L loses six links.  Router A launches the distributed
search; the transcript shows every Forward/Backward message with the
depth, low and counter values it carries.  The search classifies cut
vertices and cut edges, the islands it cannot reach are surveyed on their
own, and finally both reconfiguration schemes produce turn tables whose
channel dependency graphs are checked for cycles.
"""

from __future__ import annotations

from pathlib import Path

from fashion_noc.reconfig import (
    build_cdg,
    build_routing_tables,
    dump_turn_tables,
    fashion_reconfigure,
    find_dependency_cycle,
    forbidden_turn_fraction,
    updown_reconfigure,
)
from fashion_noc.sam import run_search, survey
from fashion_noc.topo import effective_graph, load_scenario

HERE = Path(__file__).parent


def names(graph, nodes):
    return " ".join(sorted(graph.name(u) for u in nodes)) or "-"


def main() -> None:
    topo = load_scenario((HERE / "scenarios" / "walkthrough.txt").read_text())
    graph = effective_graph(topo)

    print("== distributed search from A ==")
    res = run_search(graph, root=0, trace=True)
    for line in res.trace:
        print(line)

    print("\n== classification ==")
    depth = {graph.name(u): (s.depth, s.low) for u, s in enumerate(res.states) if s.visited}
    print("depth/low:", ", ".join(f"{k}={d}/{lo}" for k, (d, lo) in sorted(depth.items())))
    print("cut vertices:", names(graph, res.cut_vertices))
    islands = survey(graph, root=0)
    edges = sorted("-".join(sorted((graph.name(a), graph.name(b)))) for r in islands for a, b in r.cut_edges)
    print("cut edges (root search plus island surveys):", " ".join(edges))
    print("out of service:", names(graph, res.out_of_service(graph)))

    print("\n== reconfiguration inside the root component ==")
    tables, state = fashion_reconfigure(graph)
    print(f"Fashion: {state.iterations} removal rounds, {state.cycles} cycles")
    for k, (leaves, ncut) in enumerate(zip(state.leaves, state.ncut), 1):
        print(f"  round {k}: leaves {names(graph, leaves)}; prohibited at {names(graph, ncut)}")
    print(dump_turn_tables(tables, graph), end="")
    for label, t in (("Fashion", tables), ("Up*/Down*", updown_reconfigure(graph))):
        cycle = find_dependency_cycle(build_cdg(graph, t))
        routes = build_routing_tables(graph, t)
        print(
            f"{label}: forbidden {forbidden_turn_fraction(t, graph)} of through-turns, "
            f"CDG {'acyclic' if cycle is None else 'CYCLIC'}, {len(routes.hops)} routable pairs"
        )
    i, h = graph.names.index("I"), graph.names.index("H")
    path = build_routing_tables(graph, tables).path(i, h, graph)
    print("route I -> H:", " ".join(graph.name(u) for u in path))


if __name__ == "__main__":
    main()
