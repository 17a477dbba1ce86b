"""Flit-level wormhole virtual-channel router network.

Every router runs a four-stage pipeline (route computation, VC allocation,
switch allocation, switch traversal), one cycle per stage, followed by a
one-cycle link.  Credits return one cycle after a flit leaves a buffer.  A
head flit that arrives at cycle ``t`` is therefore written into the next
router's buffer at ``t + 5``.

Each router owns ``Q`` virtual-channel slots.  In *static* mode slot ``q``
belongs to input port ``q // vcs``.  In *unified* mode the slots form a
router-wide pool: an upstream allocator takes any free slot for the input
port it feeds, subject to a per-port cap that keeps one slot available to
every other port.  A VC holds at most one packet; it is reserved by the
upstream allocator and released one cycle after the tail leaves.

Channels that survive on a single wire (Ex-Fashion) carry one flit per
cycle in either direction; when both ends want the wire in the same cycle
the grant alternates.

The cycle loop is compiled with numba.  :class:`Network` owns the state
arrays and exposes a small Python API around the kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numba as nb
import numpy as np

from .reconfig import InvariantViolation, RoutingTables, TurnTables
from .topo import Graph, Port

__all__ = [
    "RouterConfig",
    "Grant",
    "Wires",
    "BidiChannel",
    "VcPool",
    "FlitEvent",
    "RouterError",
    "DeadlockError",
    "TurnViolation",
    "Network",
    "bidi_arbitrate",
    "vc_pool_allocate",
    "router_tick",
    "EVENT_NAMES",
]

NPORTS = 5
LOCAL = int(Port.L)

# VC states
IDLE, ROUTED, ACTIVE = 0, 1, 2

# kernel status codes
OK, DEADLOCK, TURN, NOROUTE, LEAK = 0, 1, 2, 3, 4

# per-flit event codes
EV_INJECT, EV_RC, EV_VA, EV_SA, EV_ST, EV_EJECT = range(6)
EVENT_NAMES = ("inject", "rc", "va", "sa", "st", "eject")

# stats slots
S_INJ_FLITS, S_EJ_FLITS, S_WIN_FLITS, S_LOG_N, S_WIT_N, S_WIT_Q, S_WIT_C = range(7)
S_LEN = 8

FLIT_BITS = 8  # flit code = packet * 256 + sequence number


class RouterError(RuntimeError):
    pass


class DeadlockError(RouterError):
    pass


class TurnViolation(InvariantViolation):
    pass


@dataclass(frozen=True)
class RouterConfig:
    vcs: int = 4
    depth: int = 8
    unified: bool = False
    pool_size: int | None = None  # unified pool; defaults to ports * vcs
    bidirectional: bool = False
    adaptive: bool = True
    deadlock_threshold: int | None = None  # default 10 * diameter * 4
    sentinel: str = "flit"  # "flit": any blocked flit trips; "global": only a frozen network
    log_capacity: int = 0

    def __post_init__(self):
        if self.vcs < 1 or self.depth < 1:
            raise ValueError("vcs and depth must be positive")
        if self.pool_size is not None and self.pool_size < NPORTS:
            raise ValueError("a unified pool needs at least one slot per port")
        if self.sentinel not in ("flit", "global"):
            raise ValueError("sentinel must be 'flit' or 'global'")

    @property
    def slots(self) -> int:
        if self.unified and self.pool_size is not None:
            return self.pool_size
        return NPORTS * self.vcs


# ---------------------------------------------------------------------------
# kernels shared by the Python API and the cycle loop


@nb.njit(cache=True)
def _alloc(vc_port, vc_resv, vc_dead, rel_pend, n, pin, unified, vcs, cap):
    """Reserve one VC at router ``n`` for input port ``pin``; -1 if none."""
    Q = vc_port.shape[1]
    if not unified:
        base = pin * vcs
        for q in range(base, base + vcs):
            if vc_dead[n, q] == 0 and vc_resv[n, q] == 0 and rel_pend[n, q] == 0:
                vc_resv[n, q] = 1
                return q
        return -1
    held = np.zeros(NPORTS, np.int64)
    free = 0
    for q in range(Q):
        if vc_port[n, q] >= 0:
            held[vc_port[n, q]] += 1
        elif vc_dead[n, q] == 0:
            free += 1
    if held[pin] >= cap or free == 0:
        return -1
    # keep one free slot for every other port that holds none
    starving = 0
    for i in range(NPORTS):
        if i != pin and held[i] == 0:
            starving += 1
    if free - 1 < starving:
        return -1
    for q in range(Q):
        if vc_port[n, q] == -1 and vc_dead[n, q] == 0:
            vc_port[n, q] = pin
            vc_resv[n, q] = 1
            return q
    return -1


@nb.njit(cache=True)
def _bidi(last, fwd, rev):
    """Return (grant, new_last): grant 0 none, 1 forward, 2 reverse."""
    if fwd and rev:
        g = 2 if last == 1 else 1
        return g, g
    if fwd:
        return 1, last
    if rev:
        return 2, last
    return 0, last


@nb.njit(cache=True)
def _log(log, stats, c, n, ev, f):
    k = stats[S_LOG_N]
    if k < log.shape[0]:
        log[k, 0] = c
        log[k, 1] = n
        log[k, 2] = ev
        log[k, 3] = f >> FLIT_BITS
        log[k, 4] = f & ((1 << FLIT_BITS) - 1)
        stats[S_LOG_N] = k + 1


@nb.njit(cache=True)
def _downstream_space(vc_port, vc_dead, cred, v, pin, unified, depth, cap):
    Q = vc_port.shape[1]
    space = 0
    owned = 0
    free = 0
    for q in range(Q):
        if vc_port[v, q] == pin:
            owned += 1
            space += cred[v, q]
        elif unified and vc_port[v, q] == -1 and vc_dead[v, q] == 0:
            free += 1
    if unified:
        extra = min(free, cap - owned)
        if extra > 0:
            space += extra * depth
    return space


@nb.njit(cache=True)
def _run(
    c0, c1, warmup, measure_end, inject_on, unified, vcs, depth, cap, threshold, per_flit,
    nbr, inport, half_id, half_dir, tdm_last, permit, rt_ports, rt_cnt, adaptive,
    vc_port, vc_resv, vc_dead, vc_state, vc_out, vc_dq, vc_t, vc_stall,
    buf_f, buf_a, buf_h, buf_n, cred, cred_pend, rel_pend,
    pk_src, pk_dst, pk_gen, pk_size, pk_inj, pk_done,
    q_pk, q_ptr, q_end, ni_pk, ni_seq, ni_q,
    rr_in, rr_out, rr_va, stats, log,
):
    N, Q = vc_port.shape
    H = tdm_last.shape[0]
    req_q = np.empty(NPORTS, np.int64)
    req_o = np.empty(NPORTS, np.int64)
    req_d = np.empty(NPORTS, np.int64)
    gnt = np.full((N, NPORTS), -1, np.int64)
    want = np.zeros((H, 2), np.int64)
    want_n = np.zeros((H, 2), np.int64)
    want_p = np.zeros((H, 2), np.int64)
    logging = log.shape[0] > 0
    last_move = c0
    for c in range(c0, c1):
        # -- apply credits and releases from the previous cycle ------------
        for n in range(N):
            for q in range(Q):
                if cred_pend[n, q] != 0:
                    cred[n, q] += cred_pend[n, q]
                    cred_pend[n, q] = 0
                if rel_pend[n, q] != 0:
                    rel_pend[n, q] = 0
                    vc_resv[n, q] = 0
                    if unified:
                        vc_port[n, q] = -1
        # -- network interfaces -------------------------------------------
        for n in range(N):
            if ni_pk[n] < 0 and inject_on and q_ptr[n] < q_end[n]:
                p = q_pk[q_ptr[n]]
                if pk_gen[p] <= c:
                    q = _alloc(vc_port, vc_resv, vc_dead, rel_pend, n, LOCAL, unified, vcs, cap[n])
                    if q >= 0:
                        ni_pk[n] = p
                        ni_seq[n] = 0
                        ni_q[n] = q
                        q_ptr[n] += 1
            if ni_pk[n] >= 0:
                q = ni_q[n]
                if cred[n, q] > 0:
                    p = ni_pk[n]
                    s = ni_seq[n]
                    f = (p << FLIT_BITS) | s
                    slot = (buf_h[n, q] + buf_n[n, q]) % depth
                    buf_f[n, q, slot] = f
                    buf_a[n, q, slot] = c
                    if buf_n[n, q] == 0:
                        vc_stall[n, q] = c
                    buf_n[n, q] += 1
                    cred[n, q] -= 1
                    stats[S_INJ_FLITS] += 1
                    if s == 0:
                        pk_inj[p] = c
                    if logging:
                        _log(log, stats, c, n, EV_INJECT, f)
                    s += 1
                    if s == pk_size[p]:
                        ni_pk[n] = -1
                    else:
                        ni_seq[n] = s
        # -- route computation and VC allocation --------------------------
        for n in range(N):
            start = rr_va[n]
            for k in range(Q):
                q = (start + k) % Q
                if buf_n[n, q] == 0:
                    continue
                st = vc_state[n, q]
                if st == IDLE:
                    h = buf_h[n, q]
                    if buf_a[n, q, h] > c:
                        continue
                    f = buf_f[n, q, h]
                    p = f >> FLIT_BITS
                    d = pk_dst[p]
                    if d == n:
                        out = LOCAL
                    else:
                        pin = vc_port[n, q]
                        cnt = rt_cnt[n, pin, d]
                        if cnt == 0:
                            stats[S_WIT_N] = n
                            stats[S_WIT_Q] = q
                            stats[S_WIT_C] = c
                            return NOROUTE, c
                        out = rt_ports[n, pin, d, 0]
                        if adaptive and cnt > 1:
                            best = -1
                            for j in range(cnt):
                                po = rt_ports[n, pin, d, j]
                                sp = _downstream_space(
                                    vc_port, vc_dead, cred, nbr[n, po], inport[n, po],
                                    unified, depth, cap[nbr[n, po]],
                                )
                                if sp > best:
                                    best = sp
                                    out = po
                    vc_out[n, q] = out
                    vc_state[n, q] = ROUTED
                    vc_t[n, q] = c + 1
                    if logging:
                        _log(log, stats, c, n, EV_RC, f)
                elif st == ROUTED and c >= vc_t[n, q]:
                    out = vc_out[n, q]
                    if out == LOCAL:
                        dq = -1
                    else:
                        dq = _alloc(
                            vc_port, vc_resv, vc_dead, rel_pend, nbr[n, out], inport[n, out],
                            unified, vcs, cap[nbr[n, out]],
                        )
                        if dq < 0:
                            continue
                    vc_dq[n, q] = dq
                    vc_state[n, q] = ACTIVE
                    vc_t[n, q] = c + 1
                    if logging:
                        _log(log, stats, c, n, EV_VA, buf_f[n, q, buf_h[n, q]])
            rr_va[n] = (start + 1) % Q
        # -- switch allocation: input stage then output stage --------------
        for n in range(N):
            for i in range(NPORTS):
                req_q[i] = -1
                req_d[i] = Q + 1
            for q in range(Q):
                if buf_n[n, q] == 0:
                    continue
                if c - vc_stall[n, q] > threshold and (per_flit or c - last_move > threshold):
                    stats[S_WIT_N] = n
                    stats[S_WIT_Q] = q
                    stats[S_WIT_C] = c
                    return DEADLOCK, c
                if vc_state[n, q] != ACTIVE or c < vc_t[n, q]:
                    continue
                h = buf_h[n, q]
                if buf_a[n, q, h] + 2 > c:
                    continue
                out = vc_out[n, q]
                if out != LOCAL and cred[nbr[n, out], vc_dq[n, q]] <= 0:
                    continue
                i = vc_port[n, q]
                dist = (q - rr_in[n, i]) % Q
                if dist < req_d[i]:
                    req_d[i] = dist
                    req_q[i] = q
                    req_o[i] = out
            for o in range(NPORTS):
                gnt[n, o] = -1
            for o in range(NPORTS):
                base = rr_out[n, o]
                for k in range(NPORTS):
                    i = (base + k) % NPORTS
                    if req_q[i] >= 0 and req_o[i] == o:
                        gnt[n, o] = req_q[i]
                        break
        # -- single-wire channels: one direction per cycle -----------------
        if H > 0:
            for n in range(N):
                for o in range(4):
                    ch = half_id[n, o]
                    if ch >= 0 and gnt[n, o] >= 0:
                        dr = half_dir[n, o]
                        want[ch, dr] = 1
                        want_n[ch, dr] = n
                        want_p[ch, dr] = o
            for ch in range(H):
                if want[ch, 0] == 1 and want[ch, 1] == 1:
                    g, tdm_last[ch] = _bidi(tdm_last[ch], True, True)
                    lose = 1 if g == 1 else 0
                    gnt[want_n[ch, lose], want_p[ch, lose]] = -1
                want[ch, 0] = 0
                want[ch, 1] = 0
        # -- switch and link traversal -------------------------------------
        for n in range(N):
            for o in range(NPORTS):
                q = gnt[n, o]
                if q < 0:
                    continue
                pin = vc_port[n, q]
                if pin != LOCAL and o != LOCAL and permit[n, pin, o] == 0:
                    stats[S_WIT_N] = n
                    stats[S_WIT_Q] = q
                    stats[S_WIT_C] = c
                    return TURN, c
                h = buf_h[n, q]
                f = buf_f[n, q, h]
                p = f >> FLIT_BITS
                s = f & ((1 << FLIT_BITS) - 1)
                buf_h[n, q] = (h + 1) % depth
                buf_n[n, q] -= 1
                cred_pend[n, q] += 1
                vc_stall[n, q] = c
                last_move = c
                rr_in[n, pin] = (q + 1) % Q
                rr_out[n, o] = (pin + 1) % NPORTS
                tail = s == pk_size[p] - 1
                if logging:
                    _log(log, stats, c, n, EV_SA, f)
                    _log(log, stats, c + 1, n, EV_ST, f)
                if o == LOCAL:
                    stats[S_EJ_FLITS] += 1
                    if warmup <= c + 1 < measure_end:
                        stats[S_WIN_FLITS] += 1
                    if tail:
                        pk_done[p] = c + 1
                    if logging:
                        _log(log, stats, c + 1, n, EV_EJECT, f)
                else:
                    v = nbr[n, o]
                    dq = vc_dq[n, q]
                    cred[v, dq] -= 1
                    slot = (buf_h[v, dq] + buf_n[v, dq]) % depth
                    buf_f[v, dq, slot] = f
                    buf_a[v, dq, slot] = c + 3
                    if buf_n[v, dq] == 0:
                        vc_stall[v, dq] = c + 3
                    buf_n[v, dq] += 1
                if tail:
                    vc_state[n, q] = IDLE
                    rel_pend[n, q] = 1
        # -- flit conservation ---------------------------------------------
        if c % 10000 == 0:
            held = 0
            for n in range(N):
                for q in range(Q):
                    held += buf_n[n, q]
            if stats[S_INJ_FLITS] != stats[S_EJ_FLITS] + held:
                return LEAK, c
    return OK, c1


# ---------------------------------------------------------------------------
# Python-facing pieces


class Grant(IntEnum):
    NONE = 0
    FORWARD = 1
    REVERSE = 2
    BOTH = 3


class Wires(IntEnum):
    BOTH = 0
    FORWARD_ONLY = 1
    REVERSE_ONLY = 2


@dataclass
class BidiChannel:
    """Arbitration state of one channel between routers ``a < b``."""

    wires: Wires = Wires.BOTH
    last: int = 0  # last direction granted under contention

    def grant(self, pending_fwd: bool, pending_rev: bool) -> Grant:
        return bidi_arbitrate(self, pending_fwd, pending_rev)


def bidi_arbitrate(channel: BidiChannel, pending_fwd: bool, pending_rev: bool, cycle: int = 0) -> Grant:
    """Direction grant for one cycle.

    With both wires healthy each direction has its own wire.  A single
    surviving wire is shared: a lone requester wins at once and contention
    alternates.  ``cycle`` is accepted for symmetry with the tick API; the
    decision depends only on the arbiter's state.
    """
    if channel.wires is Wires.BOTH:
        return Grant(int(bool(pending_fwd)) | (2 * int(bool(pending_rev))))
    g, channel.last = _bidi(channel.last, bool(pending_fwd), bool(pending_rev))
    return Grant(g)


@dataclass
class VcPool:
    """VC slots of a single router, for exercising the allocator directly."""

    vcs: int = 4
    unified: bool = True
    pool_size: int | None = None
    faulty: int = 0
    faulty_port: int | None = None
    port: np.ndarray = field(init=False)
    resv: np.ndarray = field(init=False)
    dead: np.ndarray = field(init=False)

    def __post_init__(self):
        slots = (self.pool_size or NPORTS * self.vcs) if self.unified else NPORTS * self.vcs
        if self.unified:
            self.port = np.full((1, slots), -1, np.int64)
        else:
            self.port = (np.arange(slots) // self.vcs).reshape(1, slots).astype(np.int64)
        self.resv = np.zeros((1, slots), np.int64)
        self.dead = np.zeros((1, slots), np.int64)
        for k in range(self.faulty):
            if self.unified:
                self.dead[0, slots - 1 - k] = 1
            else:
                p = Port.W if self.faulty_port is None else self.faulty_port
                self.dead[0, int(p) * self.vcs + self.vcs - 1 - k] = 1

    @property
    def size(self) -> int:
        return self.port.shape[1]

    @property
    def effective_size(self) -> int:
        return int(self.size - self.dead.sum())

    @property
    def cap(self) -> int:
        return self.effective_size - (NPORTS - 1) if self.unified else self.vcs

    def usable(self, in_port: int) -> int:
        """Number of VCs ``in_port`` could hold right now if it asked."""
        if self.unified:
            return min(self.cap, self.effective_size)
        base = int(in_port) * self.vcs
        return int(self.vcs - self.dead[0, base : base + self.vcs].sum())

    def owned(self, in_port: int) -> list[int]:
        return [q for q in range(self.size) if self.resv[0, q] and self.port[0, q] == int(in_port)]

    def release(self, q: int) -> None:
        self.resv[0, q] = 0
        if self.unified:
            self.port[0, q] = -1


def vc_pool_allocate(pool: VcPool, in_port: int, demand: int) -> list[int]:
    """Grant up to ``demand`` free VCs to ``in_port``.

    Requests beyond what the pool (or the per-port cap) can give are simply
    deferred; the returned list may be shorter than ``demand``.
    """
    rel = np.zeros_like(pool.resv)
    out = []
    for _ in range(max(0, demand)):
        q = _alloc(pool.port, pool.resv, pool.dead, rel, 0, int(in_port), pool.unified, pool.vcs, pool.cap)
        if q < 0:
            break
        out.append(int(q))
    return out


@dataclass(frozen=True)
class FlitEvent:
    cycle: int
    node: int
    event: str
    packet: int
    flit: int

    def csv(self) -> str:
        return f"{self.cycle},{self.node},{self.event},{self.packet},{self.flit}"


def _diameter(graph: Graph, nodes: list[int]) -> int:
    from collections import deque

    best = 0
    keep = set(nodes)
    for s in nodes:
        dist = {s: 0}
        dq = deque([s])
        while dq:
            u = dq.popleft()
            for v in graph.ports[u]:
                if v in keep and v not in dist:
                    dist[v] = dist[u] + 1
                    dq.append(v)
        best = max(best, max(dist.values()))
    return best


class Network:
    """State of every router in the maximal connected subgraph.

    Packets are described by parallel arrays (``src``, ``dst``, generation
    cycle) and queued per source in generation order; :meth:`run` advances
    the clock.
    """

    def __init__(
        self,
        graph: Graph,
        tables: TurnTables,
        routes: RoutingTables,
        config: RouterConfig = RouterConfig(),
    ):
        self.graph = graph
        self.config = config
        self.nodes = tables.nodes
        n = graph.n
        cfg = config
        Q = cfg.slots
        self.Q = Q
        covered = set(self.nodes)
        self.nbr = np.full((n, 4), -1, np.int64)
        self.inport = np.full((n, 4), -1, np.int64)
        self.half_id = np.full((n, 4), -1, np.int64)
        self.half_dir = np.zeros((n, 4), np.int64)
        half_keys = sorted(graph.half) if cfg.bidirectional else []
        half_index = {k: i for i, k in enumerate(half_keys)}
        for u in self.nodes:
            for p, v in enumerate(graph.ports[u]):
                if v >= 0 and v in covered:
                    self.nbr[u, p] = v
                    self.inport[u, p] = int(graph.port_to(v, u))
                    key = (min(u, v), max(u, v))
                    if key in half_index:
                        self.half_id[u, p] = half_index[key]
                        self.half_dir[u, p] = 0 if u < v else 1
        self.half_keys = half_keys
        self.tdm_last = np.zeros(len(half_keys), np.int64)
        self.permit = np.zeros((n, NPORTS, NPORTS), np.uint8)
        for u in self.nodes:
            for i in range(NPORTS):
                for o in range(NPORTS):
                    self.permit[u, i, o] = tables.permitted(u, i, o)
        self.rt_ports = np.zeros((n, NPORTS, n, 4), np.int64)
        self.rt_cnt = np.zeros((n, NPORTS, n), np.int64)
        for u, entries in routes.routes.items():
            for (pin, d), outs in entries.items():
                self.rt_cnt[u, pin, d] = len(outs)
                self.rt_ports[u, pin, d, : len(outs)] = outs
        self.vc_dead = np.zeros((n, Q), np.int64)
        if cfg.unified:
            self.vc_port = np.full((n, Q), -1, np.int64)
            for _, v in graph.buffer_faults:
                if v in covered:
                    k = int(self.vc_dead[v].sum())
                    if k < Q - NPORTS:
                        self.vc_dead[v, Q - 1 - k] = 1
        else:
            self.vc_port = np.tile(np.arange(Q, dtype=np.int64) // cfg.vcs, (n, 1))
        if cfg.unified:
            self.cap = (Q - self.vc_dead.sum(axis=1) - (NPORTS - 1)).astype(np.int64)
        else:
            self.cap = np.full(n, cfg.vcs, np.int64)
        self.vc_resv = np.zeros((n, Q), np.int64)
        self.vc_state = np.zeros((n, Q), np.int64)
        self.vc_out = np.zeros((n, Q), np.int64)
        self.vc_dq = np.full((n, Q), -1, np.int64)
        self.vc_t = np.zeros((n, Q), np.int64)
        self.vc_stall = np.zeros((n, Q), np.int64)
        self.buf_f = np.zeros((n, Q, cfg.depth), np.int64)
        self.buf_a = np.zeros((n, Q, cfg.depth), np.int64)
        self.buf_h = np.zeros((n, Q), np.int64)
        self.buf_n = np.zeros((n, Q), np.int64)
        self.cred = np.full((n, Q), cfg.depth, np.int64)
        self.cred_pend = np.zeros((n, Q), np.int64)
        self.rel_pend = np.zeros((n, Q), np.int64)
        self.rr_in = np.zeros((n, NPORTS), np.int64)
        self.rr_out = np.zeros((n, NPORTS), np.int64)
        self.rr_va = np.zeros(n, np.int64)
        self.stats = np.zeros(S_LEN, np.int64)
        self.log = np.zeros((cfg.log_capacity, 5), np.int64)
        self.ni_pk = np.full(n, -1, np.int64)
        self.ni_seq = np.zeros(n, np.int64)
        self.ni_q = np.zeros(n, np.int64)
        if cfg.deadlock_threshold is not None:
            self.threshold = int(cfg.deadlock_threshold)
        else:
            self.threshold = 10 * max(1, _diameter(graph, self.nodes)) * 4
        self.cycle = 0
        self.load_packets(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64))

    # -- packets -----------------------------------------------------------
    def load_packets(self, src, dst, gen, size=8, order=None) -> None:
        """Install packets and build per-source queues.

        ``order`` (packet indices) lists packets to queue; by default all of
        them, sorted by generation cycle within each source.
        """
        self.pk_src = np.asarray(src, np.int64)
        self.pk_dst = np.asarray(dst, np.int64)
        self.pk_gen = np.asarray(gen, np.int64)
        sizes = np.broadcast_to(np.asarray(size, np.int64), self.pk_src.shape)
        if np.any(sizes < 1) or np.any(sizes >= 1 << FLIT_BITS):
            raise ValueError("packet size out of range")
        self.pk_size = np.ascontiguousarray(sizes)
        self.pk_inj = np.full(len(self.pk_src), -1, np.int64)
        self.pk_done = np.full(len(self.pk_src), -1, np.int64)
        self.requeue(np.arange(len(self.pk_src)) if order is None else np.asarray(order, np.int64))

    def requeue(self, packets) -> None:
        """Rebuild source queues from ``packets`` (any order)."""
        packets = np.asarray(packets, np.int64)
        n = self.graph.n
        key = np.lexsort((packets, self.pk_gen[packets], self.pk_src[packets]))
        q = packets[key]
        counts = np.bincount(self.pk_src[q], minlength=n) if len(q) else np.zeros(n, np.int64)
        ends = np.cumsum(counts)
        self.q_pk = np.ascontiguousarray(q, dtype=np.int64)
        self.q_ptr = (ends - counts).astype(np.int64)
        self.q_end = ends.astype(np.int64)

    # -- clock -------------------------------------------------------------
    def run(self, until: int, *, warmup: int = 0, measure_end: int | None = None, inject: bool = True) -> None:
        if until <= self.cycle:
            return
        cfg = self.config
        end = measure_end if measure_end is not None else 1 << 62
        status, c = _run(
            self.cycle, until, warmup, end, inject, cfg.unified, cfg.vcs, cfg.depth, self.cap,
            self.threshold, cfg.sentinel == "flit",
            self.nbr, self.inport, self.half_id, self.half_dir, self.tdm_last, self.permit,
            self.rt_ports, self.rt_cnt, cfg.adaptive,
            self.vc_port, self.vc_resv, self.vc_dead, self.vc_state, self.vc_out, self.vc_dq,
            self.vc_t, self.vc_stall,
            self.buf_f, self.buf_a, self.buf_h, self.buf_n, self.cred, self.cred_pend, self.rel_pend,
            self.pk_src, self.pk_dst, self.pk_gen, self.pk_size, self.pk_inj, self.pk_done,
            self.q_pk, self.q_ptr, self.q_end, self.ni_pk, self.ni_seq, self.ni_q,
            self.rr_in, self.rr_out, self.rr_va, self.stats, self.log,
        )
        self.cycle = int(c)
        if status == OK:
            return
        node, q, when = (int(x) for x in self.stats[S_WIT_N : S_WIT_C + 1])
        where = f"router {self.graph.name(node)} vc {q} at cycle {when}"
        if status == DEADLOCK:
            raise DeadlockError(f"flit blocked longer than {self.threshold} cycles: {where}")
        if status == TURN:
            raise TurnViolation(f"prohibited turn taken: {where}")
        if status == NOROUTE:
            raise RouterError(f"no route for head flit: {where}")
        raise InvariantViolation(f"flit count mismatch at cycle {c}")

    def tick(self) -> None:
        self.run(self.cycle + 1)

    # -- inspection --------------------------------------------------------
    @property
    def injected_flits(self) -> int:
        return int(self.stats[S_INJ_FLITS])

    @property
    def ejected_flits(self) -> int:
        return int(self.stats[S_EJ_FLITS])

    @property
    def window_flits(self) -> int:
        return int(self.stats[S_WIN_FLITS])

    @property
    def flits_in_network(self) -> int:
        return int(self.buf_n.sum())

    def in_flight(self) -> np.ndarray:
        """Packets whose head entered the network but whose tail has not left."""
        return np.flatnonzero((self.pk_inj >= 0) & (self.pk_done < 0))

    def pending(self) -> np.ndarray:
        """Packets still waiting in a source queue."""
        parts = [self.q_pk[a:b] for a, b in zip(self.q_ptr, self.q_end) if b > a]
        return np.concatenate(parts) if parts else np.zeros(0, np.int64)

    def credit_conservation(self) -> bool:
        """credits + pending credits + buffered flits == depth for every live VC."""
        total = self.cred + self.cred_pend + self.buf_n
        live = self.vc_dead == 0
        return bool(np.all(total[live] == self.config.depth))

    def events(self) -> list[FlitEvent]:
        k = int(self.stats[S_LOG_N])
        return [FlitEvent(int(c), int(n), EVENT_NAMES[e], int(p), int(f)) for c, n, e, p, f in self.log[:k]]

    def flush(self) -> np.ndarray:
        """Drop every flit in the network and return the affected packets.

        Buffers, credits, reservations and partially injected packets are
        reset; the packets' injection marks are cleared so they can be
        queued again.
        """
        lost = self.in_flight()
        partial = self.ni_pk[self.ni_pk >= 0]
        lost = np.union1d(lost, partial)
        cfg = self.config
        self.buf_n[:] = 0
        self.buf_h[:] = 0
        self.cred[:] = cfg.depth
        self.cred_pend[:] = 0
        self.rel_pend[:] = 0
        self.vc_resv[:] = 0
        self.vc_state[:] = IDLE
        if cfg.unified:
            self.vc_port[:] = -1
        self.ni_pk[:] = -1
        self.pk_inj[lost] = -1
        self.stats[S_INJ_FLITS] = self.stats[S_EJ_FLITS]
        return lost


def router_tick(network: Network, cycle: int | None = None) -> Network:
    """Advance ``network`` by one cycle (to ``cycle + 1`` when given)."""
    network.run((network.cycle if cycle is None else cycle) + 1)
    return network
