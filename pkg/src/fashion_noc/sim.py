"""Traffic, fault schedules, simulation runs and Monte Carlo campaigns."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import reconfig, sam
from .reconfig import build_routing_tables, fashion_reconfigure, updown_reconfigure
from .router import Network, RouterConfig
from .topo import (
    FaultModel,
    Graph,
    Mode,
    Topology,
    TopologyError,
    build_mesh,
    build_torus,
    effective_graph,
    inject_faults,
    oracle_components,
)

__all__ = [
    "TrafficKind",
    "TrafficPattern",
    "Packet",
    "Scheme",
    "FaultEvent",
    "Metrics",
    "CampaignRow",
    "CampaignResult",
    "NetworkDeadError",
    "generate_traffic",
    "destination",
    "build_network",
    "run_simulation",
    "connectivity_campaign",
    "trial_seed",
    "mean_ci",
    "SIM_HEADER",
    "CAMPAIGN_HEADER",
    "metrics_csv",
]

SIM_HEADER = "scheme,pattern,rate,faults,seed,throughput,avg_latency,reconfig_cycles_mean"
CAMPAIGN_HEADER = (
    "fault_count,trials,avg_cut_e,pct_fully_connected,avg_dropped,"
    "forbidden_turn_frac_fashion,forbidden_turn_frac_updown"
)


class NetworkDeadError(TopologyError):
    pass


class TrafficKind(str, Enum):
    UNIFORM = "uniform"
    TRANSPOSE = "transpose"
    BITCOMP = "bitcomp"


@dataclass(frozen=True)
class TrafficPattern:
    kind: TrafficKind = TrafficKind.UNIFORM
    injection_rate: float = 0.1  # flits / node / cycle
    packet_size: int = 8

    def __post_init__(self):
        object.__setattr__(self, "kind", TrafficKind(self.kind))
        if not 0.0 <= self.injection_rate <= 1.0:
            raise ValueError("injection rate must lie in [0, 1]")
        if not 1 <= self.packet_size < 256:
            raise ValueError("packet size must lie in [1, 255]")

    @property
    def packet_probability(self) -> float:
        return self.injection_rate / self.packet_size


@dataclass(frozen=True)
class Packet:
    src: int
    dst: int
    gen_cycle: int


class Scheme(str, Enum):
    FASHION = "fashion"
    EXFASHION = "exfashion"
    UPDOWN = "updown"

    @property
    def mode(self) -> Mode:
        return Mode.EXFASHION if self is Scheme.EXFASHION else Mode.FASHION


@dataclass(frozen=True, order=True)
class FaultEvent:
    cycle: int
    kind: str  # "link" or "node"
    element: tuple[int, ...]

    def apply(self, topo: Topology) -> Topology:
        if self.kind == "node":
            return topo.with_faults(nodes=[self.element[0]])
        if self.kind == "link":
            return topo.with_faults(links=[tuple(self.element)])
        raise ValueError(f"unknown fault kind {self.kind!r}")


@dataclass
class Metrics:
    throughput: float  # flits / cycle delivered network-wide in the window
    avg_latency: float  # generation of head to ejection of tail
    injected_packets: int
    delivered_packets: int
    lost_packets: int = 0
    retransmitted_packets: int = 0
    skipped_packets: int = 0
    reconfig_cycles: list[int] = field(default_factory=list)
    window: int = 0
    nodes: int = 0

    @property
    def throughput_per_node(self) -> float:
        return self.throughput / self.nodes if self.nodes else 0.0

    @property
    def reconfig_cycles_mean(self) -> float:
        return float(np.mean(self.reconfig_cycles)) if self.reconfig_cycles else 0.0


# ---------------------------------------------------------------------------
# traffic


def destination(kind: TrafficKind, node: int, rows: int, cols: int) -> int | None:
    """Fixed destination of a permutation pattern (``None`` for uniform)."""
    kind = TrafficKind(kind)
    if kind is TrafficKind.TRANSPOSE:
        r, c = divmod(node, cols)
        if c >= rows or r >= cols:
            return None
        return c * cols + r
    if kind is TrafficKind.BITCOMP:
        n = rows * cols
        bits = max(1, math.ceil(math.log2(n)))
        d = ~node & ((1 << bits) - 1)
        return d if d < n else None
    return None


def generate_traffic(
    pattern: TrafficPattern,
    node: int,
    cycle: int,
    rng: np.random.Generator,
    *,
    gmax: Sequence[int],
    rows: int,
    cols: int,
) -> Packet | None:
    """One Bernoulli trial for ``node`` at ``cycle``."""
    if rng.random() >= pattern.packet_probability:
        return None
    if pattern.kind is TrafficKind.UNIFORM:
        others = [u for u in gmax if u != node]
        if not others:
            return None
        return Packet(node, others[int(rng.integers(len(others)))], cycle)
    d = destination(pattern.kind, node, rows, cols)
    if d is None or d == node or d not in gmax:
        return None
    return Packet(node, d, cycle)


def _arrivals(rng: np.random.Generator, p: float, nodes: Sequence[int], horizon: int):
    """Bernoulli(p) packet arrivals per node over ``[0, horizon)``, drawn as
    geometric inter-arrival gaps."""
    src, gen = [], []
    if p <= 0.0 or horizon <= 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    for u in nodes:
        times = []
        t = -1
        chunk = int(horizon * p * 1.2) + 16
        while True:
            gaps = rng.geometric(p, size=chunk)
            ts = t + np.cumsum(gaps)
            times.append(ts[ts < horizon])
            if ts[-1] >= horizon:
                break
            t = int(ts[-1])
        ts = np.concatenate(times)
        src.append(np.full(len(ts), u, np.int64))
        gen.append(ts.astype(np.int64))
    return np.concatenate(src), np.concatenate(gen)


def _assign_destinations(kind, src, draw, gmax_sorted, rows, cols):
    """Destinations for packets from ``src`` given the current gmax.

    Uniform traffic maps the stored uniform variate onto gmax minus the
    source; permutation patterns yield -1 where the partner is unusable.
    """
    dst = np.full(len(src), -1, np.int64)
    live = np.zeros(rows * cols, bool)
    live[list(gmax_sorted)] = True
    g = np.asarray(sorted(gmax_sorted), np.int64)
    ok = live[src]
    if kind is TrafficKind.UNIFORM:
        k = len(g)
        if k < 2:
            return dst
        pos = np.searchsorted(g, src)
        idx = np.minimum((draw * (k - 1)).astype(np.int64), k - 2)
        idx = idx + (idx >= pos)
        dst[ok] = g[idx[ok]]
        return dst
    table = np.array(
        [(-1 if (d := destination(kind, u, rows, cols)) is None else d) for u in range(rows * cols)],
        np.int64,
    )
    d = table[src]
    good = ok & (d >= 0) & (d != src)
    good[good] &= live[d[good]]
    dst[good] = d[good]
    return dst


# ---------------------------------------------------------------------------
# simulation


def build_network(graph: Graph, scheme: Scheme | str, config: RouterConfig | None = None, *, hop_latency: int = 1):
    """Reconfigure ``graph`` under ``scheme`` and wrap it in a :class:`Network`.

    Returns ``(network, gmax, reconfiguration_cycles)``.
    """
    scheme = Scheme(scheme)
    gmax = reconfig.gmax_nodes(graph)
    if not gmax:
        raise NetworkDeadError("no healthy routers left")
    if scheme is Scheme.UPDOWN:
        tables = updown_reconfigure(graph, nodes=gmax)
        # building the tree costs one spanning search plus one local step
        run = sam.run_search(graph.subgraph(gmax), hop_latency=hop_latency).run
        cycles = run.cycles + 1
    else:
        tables, state = fashion_reconfigure(graph, gmax, hop_latency=hop_latency)
        cycles = state.cycles
    routes = build_routing_tables(graph, tables, adaptive=(config or RouterConfig()).adaptive)
    if config is None:
        ex = scheme is Scheme.EXFASHION
        config = RouterConfig(unified=ex, bidirectional=ex)
    return Network(graph, tables, routes, config), gmax, cycles


def run_simulation(
    topo: Topology,
    scheme: Scheme | str,
    pattern: TrafficPattern,
    cycles: int,
    warmup: int,
    fault_schedule: Iterable[FaultEvent] = (),
    seed: int = 0,
    *,
    config: RouterConfig | None = None,
    hop_latency: int = 1,
) -> Metrics:
    """Simulate ``cycles`` cycles in total; statistics cover ``[warmup, cycles)``.

    A fault event stalls the network: every in-flight packet is dropped,
    the protocol and reconfiguration run (their duration passes on the
    clock with injection frozen), and the dropped packets are queued again
    at their sources if both ends are still reachable.
    """
    if not 0 <= warmup < cycles:
        raise ValueError("need 0 <= warmup < cycles")
    scheme = Scheme(scheme)
    events = sorted(fault_schedule)
    if any(e.cycle < 0 for e in events):
        raise ValueError("fault events must have non-negative cycles")
    rng = np.random.default_rng(seed)
    graph = effective_graph(topo, scheme.mode)
    net, gmax, rc0 = build_network(graph, scheme, config, hop_latency=hop_latency)
    n = topo.n
    src, gen = _arrivals(rng, pattern.packet_probability, range(n), cycles)
    order = np.lexsort((src, gen))
    src, gen = src[order], gen[order]
    draw = rng.random(len(src))
    dst = _assign_destinations(pattern.kind, src, draw, gmax, topo.rows, topo.cols)
    usable = dst >= 0
    skipped = int((~usable & (gen >= warmup)).sum())
    net.load_packets(src, np.where(usable, dst, 0), gen, pattern.packet_size, np.flatnonzero(usable))

    # Packets generated while the network is frozen are released at once
    # after a reconfiguration. That burst is a transient overload, so the
    # rebuilt networks only trip the deadlock sentinel on a global standstill.
    recovery = replace(net.config, sentinel="global")
    # a topology that starts out faulty has already been reconfigured once
    reconf: list[int] = [rc0] if topo.fault_count else []
    lost = retransmitted = 0
    for ev in events:
        if ev.cycle >= cycles:
            break
        net.run(ev.cycle, warmup=warmup, measure_end=cycles)
        topo = ev.apply(topo)
        graph = effective_graph(topo, scheme.mode)
        dropped = net.flush()
        waiting = net.pending()
        old = net
        try:
            net, gmax, rc = build_network(graph, scheme, recovery, hop_latency=hop_latency)
        except NetworkDeadError:
            lost += len(dropped) + len(waiting)
            net = old
            net.requeue(np.zeros(0, np.int64))
            break
        reconf.append(rc)
        # uniform packets are re-aimed inside the new gmax; fixed partners must survive
        new_dst = _assign_destinations(pattern.kind, src, draw, gmax, topo.rows, topo.cols)
        keep = np.concatenate([dropped, waiting]).astype(np.int64)
        alive = new_dst[keep] >= 0
        lost += int((~alive).sum())
        retransmitted += int(alive[: len(dropped)].sum())
        dst = np.where(new_dst >= 0, new_dst, dst)
        net.load_packets(src, np.maximum(dst, 0), gen, pattern.packet_size, keep[alive])
        net.pk_done[:] = old.pk_done
        net.stats[:3] = old.stats[:3]
        net.cycle = min(old.cycle + rc, cycles)
    net.run(cycles, warmup=warmup, measure_end=cycles)

    window = cycles - warmup
    in_window = (gen >= warmup) & (gen < cycles)
    delivered = (net.pk_done >= 0) & (net.pk_done < cycles) & in_window
    entered = in_window & ((net.pk_inj >= 0) | (net.pk_done >= 0))
    lat = (net.pk_done - gen)[delivered]
    return Metrics(
        throughput=net.window_flits / window,
        avg_latency=float(lat.mean()) if len(lat) else 0.0,
        injected_packets=int(entered.sum()),
        delivered_packets=int(delivered.sum()),
        lost_packets=lost,
        retransmitted_packets=retransmitted,
        skipped_packets=skipped,
        reconfig_cycles=reconf,
        window=window,
        nodes=len(gmax),
    )


def metrics_csv(rows: Iterable[tuple]) -> str:
    """Render ``(scheme, pattern, rate, faults, seed, Metrics)`` tuples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SIM_HEADER.split(","))
    for scheme, pattern, rate, faults, seed, m in rows:
        w.writerow(
            [
                Scheme(scheme).value,
                TrafficKind(pattern).value,
                f"{rate:.4f}",
                faults,
                seed,
                f"{m.throughput:.6f}",
                f"{m.avg_latency:.6f}",
                f"{m.reconfig_cycles_mean:.3f}",
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Monte Carlo connectivity


def trial_seed(seed: int, faults: int, trial: int) -> int:
    """Independent, order-free seed for one trial."""
    ss = np.random.SeedSequence([seed, faults, trial])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CampaignRow:
    fault_count: int
    trials: int
    avg_cut_elements: Fraction
    fully_connected_fraction: Fraction
    avg_dropped_nodes: Fraction
    forbidden_fashion: float | None = None
    forbidden_updown: float | None = None

    @property
    def pct_fully_connected(self) -> float:
        return 100.0 * float(self.fully_connected_fraction)


@dataclass
class CampaignResult:
    rows: list[CampaignRow]
    mode: Mode
    dims: tuple[int, int]
    seed: int

    def row(self, faults: int) -> CampaignRow:
        for r in self.rows:
            if r.fault_count == faults:
                return r
        raise KeyError(faults)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CAMPAIGN_HEADER.split(","))

        def opt(x):
            return "" if x is None else f"{x:.6f}"

        for r in self.rows:
            w.writerow(
                [
                    r.fault_count,
                    r.trials,
                    f"{float(r.avg_cut_elements):.6f}",
                    f"{r.pct_fully_connected:.4f}",
                    f"{float(r.avg_dropped_nodes):.6f}",
                    opt(r.forbidden_fashion),
                    opt(r.forbidden_updown),
                ]
            )
        return buf.getvalue()


def connectivity_campaign(
    dims: tuple[int, int],
    fault_counts: Sequence[int],
    trials: int,
    mode: Mode | str = Mode.FASHION,
    seed: int = 0,
    *,
    torus: bool = False,
    turns: bool = False,
    model: FaultModel | None = None,
) -> CampaignResult:
    """Table-style connectivity statistics over seeded random fault sets.

    With ``turns`` each trial also runs both reconfiguration schemes on the
    maximal connected subgraph and averages their forbidden-turn fractions.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    mode = Mode(mode)
    base = (build_torus if torus else build_mesh)(*dims)
    model = model or FaultModel()
    rows = []
    for faults in fault_counts:
        cut = full = dropped = 0
        ff = fu = 0.0
        for t in range(trials):
            m = FaultModel(model.link_weight, model.router_weight, trial_seed(seed, faults, t), model.buffer_fraction)
            g = effective_graph(_faulted_model(base, faults, m), mode)
            r = oracle_components(g)
            cut += r.cut_element_count
            full += r.fully_connected
            dropped += r.dropped
            if turns:
                ft, _ = fashion_reconfigure(g, r.gmax)
                ut = updown_reconfigure(g, nodes=r.gmax)
                ff += float(reconfig.forbidden_turn_fraction(ft, g))
                fu += float(reconfig.forbidden_turn_fraction(ut, g))
        rows.append(
            CampaignRow(
                faults,
                trials,
                Fraction(cut, trials),
                Fraction(full, trials),
                Fraction(dropped, trials),
                ff / trials if turns else None,
                fu / trials if turns else None,
            )
        )
    return CampaignResult(rows, mode, tuple(dims), seed)


def _faulted_model(topo: Topology, faults: int, model: FaultModel) -> Topology:
    return inject_faults(topo, faults, model) if faults else topo


# ---------------------------------------------------------------------------
# statistics helpers


def mean_ci(samples: Sequence[float], z: float = 1.96) -> tuple[float, float, float]:
    """Mean and normal-approximation confidence interval."""
    x = np.asarray(samples, float)
    m = float(x.mean())
    if len(x) < 2:
        return m, m, m
    h = z * float(x.std(ddof=1)) / math.sqrt(len(x))
    return m, m - h, m + h
