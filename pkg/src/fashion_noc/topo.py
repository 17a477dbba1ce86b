"""Topologies, fault injection and brute-force connectivity oracles.

Routers are numbered row-major (``id = row * cols + col``).  Every router has
four network ports (N, E, S, W) plus the Local port; a pair of opposite
directed links between two routers forms a *channel*.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Port",
    "Mode",
    "EXPLORE_ORDER",
    "NETWORK_PORTS",
    "TopologyError",
    "InvalidDimensionError",
    "FaultExhaustionError",
    "EmptyGraphError",
    "ScenarioError",
    "Topology",
    "Graph",
    "FaultModel",
    "ConnectivityReport",
    "DegreeStats",
    "build_mesh",
    "build_torus",
    "build_graph",
    "inject_faults",
    "effective_graph",
    "components",
    "cut_elements",
    "oracle_components",
    "degree_stats",
    "dump_scenario",
    "load_scenario",
]


class Port(IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3
    L = 4


NETWORK_PORTS = (Port.N, Port.E, Port.S, Port.W)

# N, W, E, S visits neighbours in ascending id order on a row-major mesh.
EXPLORE_ORDER = (Port.N, Port.W, Port.E, Port.S)

_OPPOSITE = {Port.N: Port.S, Port.S: Port.N, Port.E: Port.W, Port.W: Port.E}
_DELTA = {Port.N: (-1, 0), Port.S: (1, 0), Port.E: (0, 1), Port.W: (0, -1)}


class Mode(str, Enum):
    FASHION = "fashion"
    EXFASHION = "exfashion"


class TopologyError(ValueError):
    pass


class InvalidDimensionError(TopologyError):
    pass


class FaultExhaustionError(TopologyError):
    pass


class EmptyGraphError(TopologyError):
    pass


class ScenarioError(TopologyError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


Link = tuple[int, int]


@dataclass(frozen=True)
class Topology:
    """Physical network with per-element health.

    ``ports[u][p]`` is the router reached through network port ``p`` of ``u``
    (``-1`` when the port is unconnected).  A router fault implicitly fails
    every link incident to it.  ``buffer_faults`` are link faults that the
    unified VC pool can absorb in Ex-Fashion mode.
    """

    kind: str
    rows: int
    cols: int
    ports: tuple[tuple[int, ...], ...]
    faulty_nodes: frozenset[int] = frozenset()
    faulty_links: frozenset[Link] = frozenset()
    buffer_faults: frozenset[Link] = frozenset()
    names: tuple[str, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.ports)

    def coords(self, u: int) -> tuple[int, int]:
        return divmod(u, self.cols)

    def name(self, u: int) -> str:
        return self.names[u] if self.names else str(u)

    def node_id(self, token: str) -> int:
        if self.names and token in self.names:
            return self.names.index(token)
        return int(token)

    @property
    def channels(self) -> list[Link]:
        out = []
        for u, row in enumerate(self.ports):
            for v in row:
                if v > u:
                    out.append((u, v))
        return out

    @property
    def links(self) -> list[Link]:
        out = []
        for a, b in self.channels:
            out.append((a, b))
            out.append((b, a))
        return out

    def port_to(self, u: int, v: int) -> Port:
        return Port(self.ports[u].index(v))

    def link_faulty(self, u: int, v: int) -> bool:
        return (
            (u, v) in self.faulty_links
            or u in self.faulty_nodes
            or v in self.faulty_nodes
        )

    def with_faults(
        self,
        nodes: Iterable[int] = (),
        links: Iterable[Link] = (),
        buffers: Iterable[Link] = (),
    ) -> "Topology":
        links = frozenset(links)
        buffers = frozenset(buffers)
        for a, b in links | buffers:
            if b not in self.ports[a]:
                raise TopologyError(f"no link {a}->{b}")
        return Topology(
            self.kind,
            self.rows,
            self.cols,
            self.ports,
            self.faulty_nodes | frozenset(nodes),
            self.faulty_links | links,
            self.buffer_faults | buffers,
            self.names,
        )

    @property
    def fault_count(self) -> int:
        return len(self.faulty_nodes) + len(self.faulty_links) + len(self.buffer_faults)


def build_mesh(rows: int, cols: int) -> Topology:
    if rows < 2 or cols < 2:
        raise InvalidDimensionError(f"mesh needs rows, cols >= 2, got {rows}x{cols}")
    return _build_grid("mesh", rows, cols, wrap=False)


def build_torus(rows: int, cols: int) -> Topology:
    if rows < 3 or cols < 3:
        raise InvalidDimensionError(f"torus needs rows, cols >= 3, got {rows}x{cols}")
    return _build_grid("torus", rows, cols, wrap=True)


def _build_grid(kind: str, rows: int, cols: int, wrap: bool) -> Topology:
    ports = []
    for u in range(rows * cols):
        r, c = divmod(u, cols)
        row = []
        for p in NETWORK_PORTS:
            dr, dc = _DELTA[p]
            rr, cc = r + dr, c + dc
            if wrap:
                rr, cc = rr % rows, cc % cols
            row.append(rr * cols + cc if 0 <= rr < rows and 0 <= cc < cols else -1)
        ports.append(tuple(row))
    return Topology(kind, rows, cols, tuple(ports))


def build_graph(
    n: int, edges: Sequence[Link], names: Sequence[str] | None = None
) -> Topology:
    """Irregular topology from an undirected edge list.

    Ports are handed out N, E, S, W in order of first appearance, so every
    router can have at most four neighbours.
    """
    ports = [[-1] * 4 for _ in range(n)]
    for a, b in edges:
        if a == b or not (0 <= a < n and 0 <= b < n):
            raise TopologyError(f"bad edge {(a, b)}")
        if b in ports[a]:
            raise TopologyError(f"duplicate edge {(a, b)}")
        for u, v in ((a, b), (b, a)):
            try:
                slot = ports[u].index(-1)
            except ValueError:
                raise TopologyError(f"router {u} has more than 4 neighbours") from None
            ports[u][slot] = v
    return Topology(
        "graph", 1, n, tuple(tuple(r) for r in ports), names=tuple(names) if names else None
    )


# ---------------------------------------------------------------------------
# fault injection


@dataclass(frozen=True)
class FaultModel:
    """Uniform random faults with a fixed link:router weighting.

    ``buffer_fraction`` of link faults are tagged as input-buffer faults,
    which only matters in Ex-Fashion mode.
    """

    link_weight: float = 24.0
    router_weight: float = 1.0
    seed: int = 0
    buffer_fraction: float = 0.0

    def __post_init__(self):
        if self.link_weight <= 0 or self.router_weight <= 0:
            raise ValueError("fault ratio weights must be positive")
        if not 0.0 <= self.buffer_fraction <= 1.0:
            raise ValueError("buffer_fraction must lie in [0, 1]")

    @property
    def router_probability(self) -> float:
        return self.router_weight / (self.router_weight + self.link_weight)


def inject_faults(topo: Topology, count: int, model: FaultModel = FaultModel()) -> Topology:
    """Apply ``count`` distinct faults drawn uniformly at random.

    Each draw picks a router with probability ``router_probability`` and a
    directed link otherwise; a draw that hits an already faulty element is
    repeated.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng(model.seed)
    links = topo.links
    dead_nodes = set(topo.faulty_nodes)
    dead_links = set(topo.faulty_links)
    buffers = set(topo.buffer_faults)

    def link_bad(link):
        return link in dead_links or link in buffers or link[0] in dead_nodes or link[1] in dead_nodes

    def available():
        return (topo.n - len(dead_nodes)) + sum(1 for lk in links if not link_bad(lk))

    if count > available():
        raise FaultExhaustionError(f"cannot place {count} faults")
    p_router = model.router_probability
    placed = 0
    while placed < count:
        if rng.random() < p_router:
            u = int(rng.integers(topo.n))
            if u in dead_nodes:
                if available() == 0:
                    raise FaultExhaustionError("ran out of healthy elements")
                continue
            dead_nodes.add(u)
        else:
            link = links[int(rng.integers(len(links)))]
            if link_bad(link):
                if available() == 0:
                    raise FaultExhaustionError("ran out of healthy elements")
                continue
            if model.buffer_fraction and rng.random() < model.buffer_fraction:
                buffers.add(link)
            else:
                dead_links.add(link)
        placed += 1
    return Topology(
        topo.kind,
        topo.rows,
        topo.cols,
        topo.ports,
        frozenset(dead_nodes),
        frozenset(dead_links),
        frozenset(buffers),
        topo.names,
    )


# ---------------------------------------------------------------------------
# effective graphs


@dataclass(frozen=True)
class Graph:
    """Undirected view of the usable channels.

    ``half`` holds the channels that survive on a single wire in Ex-Fashion
    mode, keyed ``(a, b)`` with ``a < b`` and mapped to the surviving
    direction.
    """

    kind: str
    rows: int
    cols: int
    ports: tuple[tuple[int, ...], ...]
    alive: tuple[bool, ...]
    half: dict = field(default_factory=dict, compare=False, hash=False)
    buffer_faults: frozenset[Link] = frozenset()
    names: tuple[str, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.ports)

    def name(self, u: int) -> str:
        return self.names[u] if self.names else str(u)

    def nodes(self) -> list[int]:
        return [u for u, ok in enumerate(self.alive) if ok]

    def neighbors(self, u: int) -> list[int]:
        return [v for v in self.ports[u] if v >= 0]

    def degree(self, u: int) -> int:
        return sum(1 for v in self.ports[u] if v >= 0)

    def port_to(self, u: int, v: int) -> Port:
        return Port(self.ports[u].index(v))

    def has_channel(self, u: int, v: int) -> bool:
        return v >= 0 and v in self.ports[u]

    def edges(self) -> list[Link]:
        return [(u, v) for u, row in enumerate(self.ports) for v in row if v > u]

    def links(self) -> list[Link]:
        return [(u, v) for u, row in enumerate(self.ports) for v in row if v >= 0]

    def coords(self, u: int) -> tuple[int, int]:
        return divmod(u, self.cols)

    def subgraph(self, keep: Iterable[int]) -> "Graph":
        keep = set(keep)
        ports = tuple(
            tuple(v if (u in keep and v in keep) else -1 for v in row)
            for u, row in enumerate(self.ports)
        )
        alive = tuple(u in keep and ok for u, ok in enumerate(self.alive))
        half = {k: d for k, d in self.half.items() if k[0] in keep and k[1] in keep}
        return Graph(self.kind, self.rows, self.cols, ports, alive, half, self.buffer_faults, self.names)


def effective_graph(topo: Topology, mode: Mode | str = Mode.FASHION) -> Graph:
    """Channels usable under ``mode``.

    Fashion needs both wires of a channel; Ex-Fashion time-multiplexes a
    single surviving wire in both directions.  Buffer faults disable the
    channel in Fashion but are absorbed by the VC pool in Ex-Fashion.
    """
    mode = Mode(mode)
    ex = mode is Mode.EXFASHION
    dead = topo.faulty_nodes
    ports = [[-1] * 4 for _ in range(topo.n)]
    half = {}
    for a, b in topo.channels:
        if a in dead or b in dead:
            continue
        fwd = (a, b) not in topo.faulty_links
        rev = (b, a) not in topo.faulty_links
        if not ex:
            fwd = fwd and (a, b) not in topo.buffer_faults
            rev = rev and (b, a) not in topo.buffer_faults
        usable = (fwd or rev) if ex else (fwd and rev)
        if not usable:
            continue
        ports[a][topo.ports[a].index(b)] = b
        ports[b][topo.ports[b].index(a)] = a
        if not (fwd and rev):
            half[(a, b)] = (a, b) if fwd else (b, a)
    alive = tuple(u not in dead for u in range(topo.n))
    return Graph(
        topo.kind,
        topo.rows,
        topo.cols,
        tuple(tuple(r) for r in ports),
        alive,
        half,
        topo.buffer_faults if ex else frozenset(),
        topo.names,
    )


# ---------------------------------------------------------------------------
# oracles


def _reach(adj, start, banned_node=-1, banned_edge=None) -> int:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v == banned_node or v in seen:
                continue
            if banned_edge is not None and (u, v) in banned_edge:
                continue
            seen.add(v)
            stack.append(v)
    return len(seen)


def components(graph: Graph) -> list[tuple[int, ...]]:
    """Connected components of the live nodes, ordered by smallest member."""
    seen = set()
    out = []
    for s in graph.nodes():
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in graph.ports[u]:
                if v >= 0 and v not in seen:
                    seen.add(v)
                    comp.append(v)
                    queue.append(v)
        out.append(tuple(sorted(comp)))
    return out


def cut_elements(graph: Graph, nodes: Iterable[int]) -> tuple[frozenset[int], frozenset[Link]]:
    """Cut vertices and cut edges of the connected node set ``nodes``.

    Brute force: drop each element in turn and flood-fill what is left.
    """
    nodes = sorted(nodes)
    member = set(nodes)
    adj = {u: [v for v in graph.ports[u] if v in member] for u in nodes}
    size = len(nodes)
    cut_v = set()
    cut_e = set()
    if size <= 1:
        return frozenset(), frozenset()
    for u in nodes:
        if size == 2:
            break
        start = nodes[0] if u != nodes[0] else nodes[1]
        if _reach(adj, start, banned_node=u) < size - 1:
            cut_v.add(u)
    for u in nodes:
        for v in adj[u]:
            if v > u and _reach(adj, u, banned_edge={(u, v), (v, u)}) < size:
                cut_e.add((u, v))
    return frozenset(cut_v), frozenset(cut_e)


@dataclass(frozen=True)
class ConnectivityReport:
    components: tuple[tuple[int, ...], ...]
    gmax: frozenset[int]
    cut_vertices: frozenset[int]
    cut_edges: frozenset[Link]
    dropped: int

    @property
    def cut_element_count(self) -> int:
        return len(self.cut_vertices) + len(self.cut_edges)

    @property
    def fully_connected(self) -> bool:
        return len(self.components) <= 1


def _largest(comps):
    # ties go to the component holding the lowest id; comps are sorted that way
    best = ()
    for c in comps:
        if len(c) > len(best):
            best = c
    return best


def oracle_components(graph: Graph) -> ConnectivityReport:
    comps = components(graph)
    gmax = _largest(comps)
    cv, ce = cut_elements(graph, gmax)
    dropped = sum(len(c) for c in comps) - len(gmax)
    return ConnectivityReport(tuple(comps), frozenset(gmax), cv, ce, dropped)


@dataclass(frozen=True)
class DegreeStats:
    average: Fraction
    minimum: int
    maximum: int


def degree_stats(graph: Graph) -> DegreeStats:
    nodes = graph.nodes()
    if not nodes:
        raise EmptyGraphError("no healthy routers")
    degs = [graph.degree(u) for u in nodes]
    return DegreeStats(Fraction(sum(degs), len(degs)), min(degs), max(degs))


# ---------------------------------------------------------------------------
# scenario files


def dump_scenario(topo: Topology) -> str:
    if topo.kind not in ("mesh", "torus"):
        raise TopologyError("only mesh and torus scenarios are serialisable")
    lines = [f"{topo.kind} {topo.rows} {topo.cols}"]
    lines += [f"nodefault {u}" for u in sorted(topo.faulty_nodes)]
    lines += [f"linkfault {a} {b}" for a, b in sorted(topo.faulty_links)]
    lines += [f"bufferfault {a} {b}" for a, b in sorted(topo.buffer_faults)]
    return "\n".join(lines) + "\n"


def load_scenario(text: str) -> Topology:
    """Parse the line-oriented scenario format.

    ``#`` starts a comment.  Router ids may be given as integers or, when a
    ``names`` line is present, as names.
    """
    topo = None
    names = None
    nodes, links, buffers = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        try:
            if head in ("mesh", "torus"):
                if topo is not None or len(tok) != 3:
                    raise ScenarioError("expected a single '<kind> R C' header", lineno)
                build = build_mesh if head == "mesh" else build_torus
                topo = build(int(tok[1]), int(tok[2]))
                continue
            if topo is None:
                raise ScenarioError("topology header must come first", lineno)
            if head == "names":
                if len(tok) - 1 != topo.n:
                    raise ScenarioError(f"expected {topo.n} names", lineno)
                names = tuple(tok[1:])
                topo = Topology(topo.kind, topo.rows, topo.cols, topo.ports, names=names)
            elif head == "nodefault" and len(tok) == 2:
                u = topo.node_id(tok[1])
                if not 0 <= u < topo.n:
                    raise ScenarioError(f"unknown router {tok[1]}", lineno)
                nodes.append(u)
            elif head in ("linkfault", "bufferfault") and len(tok) == 3:
                a, b = topo.node_id(tok[1]), topo.node_id(tok[2])
                if not (0 <= a < topo.n) or b not in topo.ports[a]:
                    raise ScenarioError(f"no link {tok[1]}->{tok[2]}", lineno)
                (links if head == "linkfault" else buffers).append((a, b))
            else:
                raise ScenarioError(f"cannot parse {line!r}", lineno)
        except ScenarioError:
            raise
        except (ValueError, TopologyError) as exc:
            raise ScenarioError(str(exc), lineno) from exc
    if topo is None:
        raise ScenarioError("empty scenario")
    return topo.with_faults(nodes, links, buffers)
