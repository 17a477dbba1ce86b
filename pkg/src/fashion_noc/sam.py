"""Self-awareness protocol: distributed depth-first search with cut detection.

A single token walks the network.  ``Forward`` messages extend the tree to an
unvisited neighbour; a ``Forward`` that reaches an already visited router is
answered at once with a non-adopting ``Backward`` that carries the receiver's
depth (a back edge).  A finished subtree returns to its parent with an
adopting ``Backward`` carrying the subtree's ``low`` value.  Cut vertices and
bridges are classified on the way back, so the walk ends with every router
holding its own ``cut`` bit and per-port ``bridge`` bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .topo import EXPLORE_ORDER, EmptyGraphError, Graph, Port, TopologyError

__all__ = [
    "MsgKind",
    "ProtocolMessage",
    "NeighborEntry",
    "NeighborListTable",
    "SamState",
    "SearchRun",
    "SearchResult",
    "InvalidRootError",
    "ProtocolOrderError",
    "DroppedMessageError",
    "World",
    "select_root",
    "run_search",
    "classify_cut_vertex",
    "classify_cut_edge",
    "survey",
]


class InvalidRootError(TopologyError):
    pass


class ProtocolOrderError(RuntimeError):
    pass


class DroppedMessageError(RuntimeError):
    pass


class MsgKind(str, Enum):
    FORWARD = "Forward"
    BACKWARD = "Backward"


@dataclass(frozen=True)
class ProtocolMessage:
    kind: MsgKind
    sender: int
    receiver: int
    value: int  # sender depth for Forward, low (or depth when not adopted) for Backward
    counter: int
    adopted: bool = True


@dataclass
class NeighborEntry:
    neighbor: int | None = None
    valid: bool = False
    bridge: bool = False
    is_parent: bool = False
    is_child: bool = False


@dataclass
class NeighborListTable:
    entries: list[NeighborEntry]

    @property
    def parent(self) -> int | None:
        for e in self.entries:
            if e.is_parent:
                return e.neighbor
        return None

    @property
    def children(self) -> list[int]:
        return [e.neighbor for e in self.entries if e.is_child]

    @property
    def bridges(self) -> list[int]:
        return [e.neighbor for e in self.entries if e.bridge]


@dataclass
class SamState:
    depth: int
    low: int
    cut: bool = False
    root: bool = False
    visited: bool = False


@dataclass(frozen=True)
class SearchRun:
    root: int
    counter: int
    tree_edges: frozenset[tuple[int, int]]
    visit_order: tuple[int, ...]
    message_count: int
    step_count: int
    cycles: int


@dataclass
class SearchResult:
    run: SearchRun
    states: list[SamState]
    tables: list[NeighborListTable]
    trace: list[str] = field(default_factory=list)

    @property
    def visited(self) -> frozenset[int]:
        return frozenset(self.run.visit_order)

    @property
    def cut_vertices(self) -> frozenset[int]:
        return frozenset(u for u, s in enumerate(self.states) if s.visited and s.cut)

    @property
    def cut_edges(self) -> frozenset[tuple[int, int]]:
        out = set()
        for u, t in enumerate(self.tables):
            for v in t.bridges:
                out.add((min(u, v), max(u, v)))
        return frozenset(out)

    def out_of_service(self, graph: Graph) -> frozenset[int]:
        return frozenset(u for u in graph.nodes() if not self.states[u].visited)


def select_root(graph: Graph, pinned: int | None = None) -> int:
    """Highest-degree live router, lowest id on ties, unless ``pinned``."""
    if pinned is not None:
        if not (0 <= pinned < graph.n and graph.alive[pinned]):
            raise InvalidRootError(f"pinned root {pinned} is not a healthy router")
        return pinned
    best, best_deg = -1, -1
    for u in graph.nodes():
        d = graph.degree(u)
        if d > best_deg:
            best, best_deg = u, d
    if best < 0:
        raise EmptyGraphError("no healthy routers")
    return best


def classify_cut_vertex(state: SamState, children_lows: Sequence[int]) -> bool:
    if not state.visited:
        raise ProtocolOrderError("cut classification on an unvisited router")
    if state.root:
        return len(children_lows) >= 2
    return any(state.depth <= low for low in children_lows)


def classify_cut_edge(is_tree_edge: bool, parent_depth: int, child_low: int) -> bool:
    return is_tree_edge and parent_depth < child_low


class World:
    """All router states plus the in-flight token of one search."""

    def __init__(
        self,
        graph: Graph,
        root: int,
        *,
        hop_latency: int = 1,
        order: Sequence[Port] = EXPLORE_ORDER,
        trace: Callable[[str], None] | None = None,
    ):
        if not (0 <= root < graph.n and graph.alive[root]):
            raise InvalidRootError(f"root {root} is not a healthy router")
        self.graph = graph
        self.root = root
        self.hop_latency = hop_latency
        self.order = tuple(int(p) for p in order)
        self._trace = trace
        n = graph.n
        self.states = [SamState(depth=n, low=n) for _ in range(n)]
        self.tables = [
            NeighborListTable(
                [NeighborEntry(v if v >= 0 else None, v >= 0) for v in graph.ports[u][:4]]
            )
            for u in range(n)
        ]
        # per router: port -> known depth of an already visited neighbour
        self._nbr_depth: list[dict[int, int]] = [{} for _ in range(n)]
        self._child_low: list[dict[int, int]] = [{} for _ in range(n)]
        self.visit_order: list[int] = []
        self.tree_edges: set[tuple[int, int]] = set()
        self.messages = 0
        self.steps = 0
        self.cycles = 0
        self.counter = 0
        self.done = False

    # -- helpers ---------------------------------------------------------
    def _emit(self, kind: str, src: int, dst: int, counter: int) -> None:
        self.steps += 1
        if self._trace is not None:
            s = self.states[src]
            g = self.graph
            self._trace(
                f"step={self.steps} msg={kind} from={g.name(src)} to={g.name(dst)} "
                f"depth={s.depth} low={s.low} counter={counter}"
            )

    def _port(self, u: int, v: int) -> int:
        return self.graph.ports[u].index(v)

    def _send(self, msg: ProtocolMessage) -> ProtocolMessage:
        self.messages += 1
        self.cycles += self.hop_latency
        self._emit(msg.kind.value, msg.sender, msg.receiver, msg.counter)
        return msg

    def _finish_low(self, u: int) -> int:
        s = self.states[u]
        low = s.depth
        for d in self._nbr_depth[u].values():
            low = min(low, d)
        for lo in self._child_low[u].values():
            low = min(low, lo)
        s.low = low
        return low

    def _advance(self, u: int, counter: int) -> ProtocolMessage | None:
        table = self.tables[u]
        known = self._nbr_depth[u]
        kids = self._child_low[u]
        for p in self.order:
            e = table.entries[p]
            if not e.valid or e.is_parent or p in known or p in kids:
                continue
            e.is_child = True  # tentative until the neighbour adopts us
            return self._send(
                ProtocolMessage(MsgKind.FORWARD, u, e.neighbor, self.states[u].depth, counter)
            )
        s = self.states[u]
        self._finish_low(u)
        if s.root:
            s.cut = classify_cut_vertex(s, list(kids.values()))
            self.counter = counter
            self.done = True
            self._emit("Done", u, u, counter)
            return None
        parent = table.parent
        return self._send(ProtocolMessage(MsgKind.BACKWARD, u, parent, s.low, counter, True))

    # -- protocol --------------------------------------------------------
    def start(self) -> ProtocolMessage | None:
        r = self.root
        s = self.states[r]
        s.root = s.visited = True
        s.depth = s.low = 0
        self.visit_order.append(r)
        self._emit("Start", r, r, 1)
        return self._advance(r, 1)

    def step(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        """Deliver one message and return the next one (``None`` when done)."""
        i, j = msg.sender, msg.receiver
        if not self.graph.has_channel(i, j):
            raise DroppedMessageError(f"message {i}->{j} over an unusable channel")
        pj = self._port(j, i)
        sj = self.states[j]
        entry = self.tables[j].entries[pj]
        if msg.kind is MsgKind.FORWARD:
            if sj.visited:
                self._nbr_depth[j][pj] = msg.value
                return self._send(
                    ProtocolMessage(MsgKind.BACKWARD, j, i, sj.depth, msg.counter, False)
                )
            counter = msg.counter + 1
            sj.visited = True
            sj.depth = sj.low = msg.value + 1
            entry.is_parent = True
            self.visit_order.append(j)
            self.tree_edges.add((i, j))
            return self._advance(j, counter)

        # Backward
        if msg.adopted:
            if not entry.is_child:
                raise ProtocolOrderError(f"{i} returned to {j} which is not its parent")
            self._child_low[j][pj] = msg.value
            if classify_cut_edge(True, sj.depth, msg.value):
                entry.bridge = True
                self.tables[i].entries[self._port(i, j)].bridge = True
            if not sj.root and sj.depth <= msg.value:
                sj.cut = True
        else:
            entry.is_child = False
            self._nbr_depth[j][pj] = msg.value
        return self._advance(j, msg.counter)

    def run(self) -> SearchResult:
        msg = self.start()
        while msg is not None:
            msg = self.step(msg)
        run = SearchRun(
            root=self.root,
            counter=self.counter,
            tree_edges=frozenset(self.tree_edges),
            visit_order=tuple(self.visit_order),
            message_count=self.messages,
            step_count=self.steps,
            cycles=self.cycles,
        )
        return SearchResult(run, self.states, self.tables)


def run_search(
    graph: Graph,
    root: int | None = None,
    *,
    hop_latency: int = 1,
    order: Sequence[Port] = EXPLORE_ORDER,
    trace: bool = False,
) -> SearchResult:
    """Run the distributed search to quiescence from ``root``.

    ``root`` defaults to :func:`select_root`.  With ``trace`` the result
    carries one line per protocol step, including the launch and
    termination at the root.
    """
    if root is None:
        root = select_root(graph)
    lines: list[str] = []
    world = World(
        graph, root, hop_latency=hop_latency, order=order, trace=lines.append if trace else None
    )
    result = world.run()
    result.trace = lines
    return result


def survey(graph: Graph, root: int | None = None, **kwargs) -> list[SearchResult]:
    """Search from ``root``, then let every out-of-service island walk itself.

    Island searches start at the island's lowest id.  The first result is
    always the root's search; together they classify every live element.
    """
    results = [run_search(graph, root, **kwargs)]
    seen = set(results[0].visited)
    for u in graph.nodes():
        if u not in seen:
            res = run_search(graph, u, **kwargs)
            seen |= res.visited
            results.append(res)
    return results
