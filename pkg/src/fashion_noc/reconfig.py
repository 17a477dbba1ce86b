"""Turn-prohibition reconfiguration, deadlock checks and routing tables.

Two schemes produce per-router turn tables over the maximal connected
subgraph:

* :func:`fashion_reconfigure` peels the graph: leaves go first, then
  minimum-degree non-cut routers, each of which forbids every through-turn
  between its remaining neighbours.  Cut bits are refreshed by re-running the
  distributed search on what is left.
* :func:`updown_reconfigure` is the Up*/Down* baseline on a breadth-first
  tree.

A turn ``(i, x, j)`` enters ``x`` from ``i`` and leaves towards ``j``; in
port terms it is ``(port of x facing i, port of x facing j)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from . import sam
from .topo import Graph, Port, components

__all__ = [
    "ConnectivityError",
    "InvariantViolation",
    "TurnTables",
    "ReconfigState",
    "ChannelDependencyGraph",
    "RoutingTables",
    "gmax_nodes",
    "fashion_reconfigure",
    "updown_reconfigure",
    "build_cdg",
    "find_dependency_cycle",
    "build_routing_tables",
    "forbidden_turn_fraction",
    "dump_turn_tables",
    "dump_routing_tables",
]


class ConnectivityError(RuntimeError):
    pass


class InvariantViolation(RuntimeError):
    pass


Link = tuple[int, int]


@dataclass
class TurnTables:
    """Forbidden ``(in_port, out_port)`` pairs per covered router.

    U-turns are always forbidden and turns from or to the Local port are
    always permitted, so neither is stored.
    """

    forbidden: dict[int, set[tuple[int, int]]] = field(default_factory=dict)

    @property
    def nodes(self) -> list[int]:
        return sorted(self.forbidden)

    def covers(self, u: int) -> bool:
        return u in self.forbidden

    def permitted(self, u: int, pin: int, pout: int) -> bool:
        if pin == Port.L or pout == Port.L:
            return True
        if pin == pout:
            return False
        return (pin, pout) not in self.forbidden[u]

    def forbid(self, u: int, pin: int, pout: int) -> None:
        self.forbidden[u].add((int(pin), int(pout)))

    def matrix(self, u: int) -> list[list[bool]]:
        return [[self.permitted(u, i, o) for o in Port] for i in Port]


@dataclass
class ReconfigState:
    residual: frozenset[int]
    removal_label: dict[int, int]
    leaves: list[frozenset[int]]
    ncut: list[frozenset[int]]
    iterations: int
    search_cycles: int
    messages: int
    max_messages_per_search: int
    cycles: int


def gmax_nodes(graph: Graph) -> frozenset[int]:
    comps = components(graph)
    best = ()
    for c in comps:
        if len(c) > len(best):
            best = c
    return frozenset(best)


def _connected(graph: Graph, nodes: set[int]) -> bool:
    if not nodes:
        return True
    start = next(iter(nodes))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in graph.ports[u]:
            if v in nodes and v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(nodes)


def fashion_reconfigure(
    graph: Graph,
    nodes: Iterable[int] | None = None,
    *,
    hop_latency: int = 1,
    check: bool = False,
) -> tuple[TurnTables, ReconfigState]:
    """Iterative leaf removal and non-cut turn prohibition.

    Each round refreshes cut bits with a search on the residual graph, drops
    its leaves, then removes minimum-degree non-cut routers.  Candidates are
    taken in id order and skipped if adjacent to one already taken this round
    or if taking them would split the residual graph; the loop ends once at
    most two routers remain.  Every router removed in a round shares that
    round's label.

    ``cycles`` charges one hop per protocol message plus one cycle per round
    for the local leaf/non-cut decisions.
    """
    gmax = set(nodes) if nodes is not None else set(gmax_nodes(graph))
    tables = TurnTables({u: set() for u in gmax})
    residual = set(gmax)
    label: dict[int, int] = {}
    leaf_hist, ncut_hist = [], []
    search_cycles = messages = max_msgs = 0
    rounds = 0
    ports = graph.ports
    while len(residual) > 2:
        rounds += 1
        sub = graph.subgraph(residual)
        res = sam.run_search(sub, hop_latency=hop_latency)
        search_cycles += res.run.cycles
        messages += res.run.message_count
        max_msgs = max(max_msgs, res.run.message_count)
        if res.visited != residual:
            raise InvariantViolation("residual graph lost connectivity")
        deg = {u: sum(1 for v in ports[u] if v in residual) for u in residual}
        leaves = {u for u in residual if deg[u] <= 1}
        rest = residual - leaves
        candidates = sorted(u for u in rest if not res.states[u].cut)
        taken: set[int] = set()
        if candidates:
            rdeg = {u: sum(1 for v in ports[u] if v in rest) for u in candidates}
            dmin = min(rdeg.values())
            for x in (u for u in candidates if rdeg[u] == dmin):
                if any(v in taken for v in ports[x]):
                    continue
                if taken and not _connected(graph, rest - taken - {x}):
                    continue
                taken.add(x)
            for x in taken:
                nbrs = [v for v in ports[x] if v in rest]
                for i in nbrs:
                    for j in nbrs:
                        if i != j:
                            tables.forbid(x, graph.port_to(x, i), graph.port_to(x, j))
        for u in leaves | taken:
            label[u] = rounds
        leaf_hist.append(frozenset(leaves))
        ncut_hist.append(frozenset(taken))
        residual = rest - taken
        if check and not _connected(graph, residual):
            raise InvariantViolation("non-cut removal split the residual graph")
        if not leaves and not taken:
            raise InvariantViolation("reconfiguration made no progress")
    for u in residual:
        label[u] = rounds + 1
    state = ReconfigState(
        residual=frozenset(residual),
        removal_label=label,
        leaves=leaf_hist,
        ncut=ncut_hist,
        iterations=rounds,
        search_cycles=search_cycles,
        messages=messages,
        max_messages_per_search=max_msgs,
        cycles=search_cycles + rounds,
    )
    return tables, state


def updown_reconfigure(
    graph: Graph, root: int | None = None, nodes: Iterable[int] | None = None
) -> TurnTables:
    """Up*/Down* turn tables from a breadth-first tree at ``root``.

    Routers are ordered by ``(tree depth, id)``; moving to a smaller label is
    *up*.  A down-then-up turn at ``x`` is one whose two neighbours both rank
    below ``x``, and all such turns are forbidden.
    """
    gmax = set(nodes) if nodes is not None else set(gmax_nodes(graph))
    if root is None:
        root = sam.select_root(graph.subgraph(gmax))
    if root not in gmax:
        raise sam.InvalidRootError(f"root {root} lies outside the maximal connected subgraph")
    depth = {root: 0}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in graph.ports[u]:
            if v in gmax and v not in depth:
                depth[v] = depth[u] + 1
                queue.append(v)
    tables = TurnTables({u: set() for u in gmax})
    for x in gmax:
        lx = (depth[x], x)
        lower = [v for v in graph.ports[x] if v in gmax and (depth[v], v) < lx]
        for i in lower:
            for j in lower:
                if i != j:
                    tables.forbid(x, graph.port_to(x, i), graph.port_to(x, j))
    return tables


# ---------------------------------------------------------------------------
# channel dependency graph


@dataclass
class ChannelDependencyGraph:
    vertices: list[Link]
    arcs: dict[Link, list[Link]]

    @property
    def arc_count(self) -> int:
        return sum(len(v) for v in self.arcs.values())


def build_cdg(graph: Graph, tables: TurnTables) -> ChannelDependencyGraph:
    covered = set(tables.nodes)
    vertices = [(u, v) for (u, v) in graph.links() if u in covered and v in covered]
    arcs: dict[Link, list[Link]] = {lk: [] for lk in vertices}
    for u, x in vertices:
        pin = graph.port_to(x, u)
        for v in graph.ports[x]:
            if v < 0 or v == u or v not in covered:
                continue
            if tables.permitted(x, pin, graph.port_to(x, v)):
                arcs[(u, x)].append((x, v))
    return ChannelDependencyGraph(vertices, arcs)


def find_dependency_cycle(cdg: ChannelDependencyGraph) -> list[Link] | None:
    """Return one directed cycle of the CDG, or ``None`` when acyclic."""
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {v: WHITE for v in cdg.vertices}
    for s in cdg.vertices:
        if colour[s] != WHITE:
            continue
        path = [s]
        iters = [iter(cdg.arcs[s])]
        colour[s] = GREY
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                colour[path.pop()] = BLACK
                iters.pop()
                continue
            c = colour[nxt]
            if c == GREY:
                return path[path.index(nxt):]
            if c == WHITE:
                colour[nxt] = GREY
                path.append(nxt)
                iters.append(iter(cdg.arcs[nxt]))
    return None


# ---------------------------------------------------------------------------
# routing tables


@dataclass
class RoutingTables:
    """``routes[x][(in_port, dest)]`` lists the out ports on minimal
    turn-respecting paths, in port order.  ``hops[(s, d)]`` is the length of
    that minimal path."""

    routes: dict[int, dict[tuple[int, int], tuple[int, ...]]]
    hops: dict[tuple[int, int], int]

    def lookup(self, node: int, in_port: int, dest: int) -> tuple[int, ...]:
        return self.routes[node].get((int(in_port), dest), ())

    def path(self, src: int, dest: int, graph: Graph) -> list[int]:
        """Deterministic path that always takes the first listed port."""
        out = [src]
        u, pin = src, int(Port.L)
        while u != dest:
            p = self.lookup(u, pin, dest)[0]
            v = graph.ports[u][p]
            pin = int(graph.port_to(v, u))
            u = v
            out.append(u)
        return out


def build_routing_tables(
    graph: Graph,
    tables: TurnTables,
    *,
    adaptive: bool = True,
    strict: bool = True,
) -> RoutingTables:
    """All-pairs minimal routes over the turn-respecting link graph.

    For each destination a reverse breadth-first search over directed links
    gives the remaining hop count after traversing each link.  With
    ``adaptive=False`` only the first minimal port is kept.  Unreachable pairs
    raise :class:`ConnectivityError` when ``strict``.
    """
    nodes = tables.nodes
    covered = set(nodes)
    links = [(u, v) for (u, v) in graph.links() if u in covered and v in covered]
    # predecessors in the link graph: (x, v) <- (u, x) when turn (u, x, v) is allowed
    preds: dict[Link, list[Link]] = {lk: [] for lk in links}
    for u, x in links:
        pin = graph.port_to(x, u)
        for v in graph.ports[x]:
            if v >= 0 and v != u and v in covered:
                if tables.permitted(x, pin, graph.port_to(x, v)):
                    preds[(x, v)].append((u, x))
    routes: dict[int, dict[tuple[int, int], tuple[int, ...]]] = {u: {} for u in nodes}
    hops: dict[tuple[int, int], int] = {}
    for d in nodes:
        dist: dict[Link, int] = {}
        queue = deque()
        for v in graph.ports[d]:
            if v in covered:
                dist[(v, d)] = 0
                queue.append((v, d))
        while queue:
            lk = queue.popleft()
            k = dist[lk] + 1
            for p in preds[lk]:
                if p not in dist:
                    dist[p] = k
                    queue.append(p)
        for x in nodes:
            if x == d:
                continue
            outs = [(dist[(x, v)], graph.port_to(x, v)) for v in graph.ports[x] if (x, v) in dist]
            in_ports = [int(Port.L)] + [int(graph.port_to(x, u)) for u in graph.ports[x] if u in covered]
            for pin in in_ports:
                best = None
                chosen = []
                for dd, pout in outs:
                    if not tables.permitted(x, pin, pout):
                        continue
                    if best is None or dd < best:
                        best, chosen = dd, [int(pout)]
                    elif dd == best:
                        chosen.append(int(pout))
                if chosen:
                    chosen.sort()
                    routes[x][(pin, d)] = tuple(chosen if adaptive else chosen[:1])
                    if pin == Port.L:
                        hops[(x, d)] = best + 1
                elif pin == Port.L and strict:
                    raise ConnectivityError(
                        f"{graph.name(d)} unreachable from {graph.name(x)} under the turn tables"
                    )
    return RoutingTables(routes, hops)


def forbidden_turn_fraction(tables: TurnTables, graph: Graph) -> Fraction:
    """Forbidden through-turns over possible through-turns (U-turns excluded),
    counted over the covered routers."""
    total = forbidden = 0
    for x in tables.nodes:
        nbrs = [v for v in graph.ports[x] if v >= 0 and tables.covers(v)]
        d = len(nbrs)
        total += d * (d - 1)
        for i in nbrs:
            for j in nbrs:
                if i != j and not tables.permitted(x, graph.port_to(x, i), graph.port_to(x, j)):
                    forbidden += 1
    return Fraction(forbidden, total) if total else Fraction(0)


def dump_turn_tables(tables: TurnTables, graph: Graph) -> str:
    lines = []
    for u in tables.nodes:
        pairs = sorted(tables.forbidden[u])
        text = ",".join(f"{Port(i).name}{Port(o).name}" for i, o in pairs)
        lines.append(f"node {graph.name(u)} forbidden {text}".rstrip())
    return "\n".join(lines) + "\n"


def dump_routing_tables(rt: RoutingTables, graph: Graph) -> str:
    lines = []
    for u in sorted(rt.routes):
        for (pin, d), outs in sorted(rt.routes[u].items()):
            ports = "".join(Port(p).name for p in outs)
            lines.append(f"route {graph.name(u)} {Port(pin).name} {graph.name(d)} {ports}")
    return "\n".join(lines) + "\n"
