"""Command-line harness: connectivity statistics, reconfiguration reports,
simulations, performance campaigns and oracle cross-checks.

Every subcommand accepts ``--config FILE`` holding ``key = value`` lines
whose keys are the long option names (``faults = 10,20``).  Flags given on
the command line win over the file.  Results go to ``--out`` (written
atomically, only after the computation succeeded) or to stdout.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import sam
from .reconfig import (
    ConnectivityError,
    InvariantViolation,
    build_cdg,
    build_routing_tables,
    dump_turn_tables,
    fashion_reconfigure,
    find_dependency_cycle,
    forbidden_turn_fraction,
    updown_reconfigure,
)
from .router import DeadlockError, RouterConfig, RouterError
from .sim import (
    Scheme,
    TrafficPattern,
    connectivity_campaign,
    mean_ci,
    metrics_csv,
    run_simulation,
    trial_seed,
)
from .topo import (
    FaultModel,
    ScenarioError,
    Topology,
    TopologyError,
    build_mesh,
    build_torus,
    cut_elements,
    effective_graph,
    inject_faults,
    load_scenario,
    oracle_components,
)

log = logging.getLogger("fashion_noc")

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    """Bad flags or config file; exit code 1."""


class VerificationFailure(Exception):
    """A checked property did not hold; exit code 2."""


# ---------------------------------------------------------------------------
# argument types


def dims(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected RxC, got {text!r}")
    r, c = int(m[1]), int(m[2])
    if r < 1 or c < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return r, c


def _list_of(conv: Callable, lo: float | None = None, hi: float | None = None):
    def parse(text: str):
        out = []
        for tok in re.split(r"[,\s]+", text.strip()):
            if not tok:
                continue
            if re.fullmatch(r"\d+-\d+", tok) and conv is int:
                a, b = map(int, tok.split("-"))
                out.extend(range(a, b + 1))
                continue
            try:
                v = conv(tok)
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad list item {tok!r}") from None
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                raise argparse.ArgumentTypeError(f"{tok} outside [{lo}, {hi}]")
            out.append(v)
        if not out:
            raise argparse.ArgumentTypeError("empty list")
        return out

    return parse


def _bounded(conv: Callable, lo: float, hi: float | None = None):
    def parse(text: str):
        try:
            v = conv(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad number {text!r}") from None
        if v < lo or (hi is not None and v > hi):
            raise argparse.ArgumentTypeError(f"{text} outside [{lo}, {hi if hi is not None else 'inf'}]")
        return v

    return parse


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


int_list = _list_of(int, 0)
rate_list = _list_of(float, 0.0, 1.0)
mode_list = _list_of(str)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with 1, not argparse's 2
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# config files


@dataclass
class ConfigEntry:
    key: str
    value: str
    lineno: int


def read_config(path: str | Path) -> list[ConfigEntry]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise UsageError(f"{path}:{lineno}: missing key")
        out.append(ConfigEntry(key.replace("_", "-"), value, lineno))
    return out


def _apply_config(parser: argparse.ArgumentParser, entries: list[ConfigEntry], path) -> None:
    actions = {}
    for a in parser._actions:
        for s in a.option_strings:
            if s.startswith("--"):
                actions[s[2:]] = a
    defaults = {}
    for e in entries:
        a = actions.get(e.key)
        if a is None or e.key in ("config", "help"):
            raise UsageError(f"{path}:{e.lineno}: unknown key {e.key!r}")
        try:
            if isinstance(a, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                v = _bool(e.value)
                if isinstance(a, argparse._StoreFalseAction):
                    v = not v
            elif a.type is not None:
                v = a.type(e.value)
            else:
                v = e.value
            if a.choices is not None and v not in a.choices:
                raise argparse.ArgumentTypeError(f"{e.value!r} not one of {sorted(a.choices)}")
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"{path}:{e.lineno}: {e.key}: {exc}") from None
        defaults[a.dest] = v
    parser.set_defaults(**defaults)


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, *, faults="30", trials=100) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--mesh", type=dims, metavar="RxC", help="mesh dimensions (default 8x8)")
    g.add_argument("--torus", type=dims, metavar="RxC", help="torus dimensions")
    p.add_argument("--faults", type=int_list, default=int_list(faults), help="fault counts, e.g. 10,20 or 10-12")
    p.add_argument("--trials", type=_bounded(int, 1), default=trials, help="trials (seeds) per cell")
    p.add_argument("--seed", type=_bounded(int, 0), default=0, help="master seed")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--trace", action="store_true", help="print protocol transcripts or progress")
    p.add_argument("--config", help="key = value file; flags win")
    p.add_argument("--link-weight", type=_bounded(float, 0.0), default=24.0, help="relative weight of link faults")
    p.add_argument("--router-weight", type=_bounded(float, 0.0), default=1.0, help="relative weight of router faults")
    p.add_argument(
        "--buffer-fraction", type=_bounded(float, 0.0, 1.0), default=0.0,
        help="share of link faults tagged as buffer faults (Ex-Fashion absorbs them)",
    )


def _router_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--vcs", type=_bounded(int, 1), default=4, help="VCs per port")
    p.add_argument("--depth", type=_bounded(int, 1), default=8, help="flits per VC")
    p.add_argument("--packet-size", type=_bounded(int, 1, 255), default=8, help="flits per packet")
    p.add_argument("--pattern", choices=["uniform", "transpose", "bitcomp"], default="uniform")
    p.add_argument("--rates", type=rate_list, default=rate_list("0.05"), help="offered loads, flits/node/cycle")
    p.add_argument("--cycles", type=_bounded(int, 1), default=120_000, help="total cycles incl. warmup")
    p.add_argument("--warmup", type=_bounded(int, 0), default=20_000, help="warmup cycles")
    p.add_argument("--hop-latency", type=_bounded(int, 1), default=1, help="protocol cycles per hop")
    p.add_argument("--unified", type=_bool, default=None, help="unified VC pool (default: on for exfashion)")
    p.add_argument("--bidirectional", type=_bool, default=None, help="bidirectional half channels")
    p.add_argument(
        "--sentinel", choices=["flit", "global"], default="flit",
        help="deadlock sentinel: per blocked flit, or only on a global standstill",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fashion-noc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("connectivity", help="Monte Carlo connectivity statistics (CSV)")
    _common(p, faults="10,20,30,40,50,60", trials=1000)
    p.add_argument("--mode", choices=["fashion", "exfashion"], default="fashion")
    p.add_argument("--turns", action="store_true", help="also average forbidden-turn fractions")
    p.set_defaults(func=cmd_connectivity)

    p = sub.add_parser("reconfig", help="detect, reconfigure and verify one scenario")
    _common(p, faults="0", trials=1)
    p.add_argument("scenario", nargs="?", help="scenario file (default: random faults on the mesh)")
    p.add_argument("--mode", choices=["fashion", "exfashion"], default="fashion")
    p.add_argument("--root", help="pin the search root (id or name)")
    p.add_argument("--hop-latency", type=_bounded(int, 1), default=1)
    p.add_argument("--tables", action="store_true", help="dump the turn tables")
    p.set_defaults(func=cmd_reconfig)

    p = sub.add_parser("simulate", help="flit-level simulation of one scheme (CSV)")
    _common(p, faults="0", trials=1)
    p.add_argument("--mode", choices=[s.value for s in Scheme], default="fashion")
    _router_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("campaign", help="paired latency/throughput comparison of schemes (CSV)")
    _common(p, faults="5,10,15", trials=10)
    p.add_argument("--mode", type=mode_list, default=mode_list("fashion,updown"), help="schemes to compare")
    _router_flags(p)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("oracle-check", help="distributed search versus brute force")
    _common(p, faults="10,20,30,40,50,60", trials=100)
    p.add_argument("scenario", nargs="?", help="check one scenario file instead of random trials")
    p.add_argument("--mode", choices=["fashion", "exfashion"], default="fashion")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(sub, read_config(args.config), args.config)
        args = parser.parse_args(argv)
        # a topology flag on the command line beats either key in the file
        if "--mesh" in argv or any(a.startswith("--mesh=") for a in argv):
            args.torus = None
        elif "--torus" in argv or any(a.startswith("--torus=") for a in argv):
            args.mesh = None
    if getattr(args, "warmup", 0) >= getattr(args, "cycles", 1):
        raise UsageError("--warmup must be smaller than --cycles")
    return args


# ---------------------------------------------------------------------------
# helpers


def _base(args) -> Topology:
    if args.torus:
        return build_torus(*args.torus)
    return build_mesh(*(args.mesh or (8, 8)))


def _model(args, seed: int) -> FaultModel:
    return FaultModel(args.link_weight, args.router_weight, seed, args.buffer_fraction)


def _faulted(args, base: Topology, faults: int, trial: int) -> Topology:
    if faults == 0:
        return base
    return inject_faults(base, faults, _model(args, trial_seed(args.seed, faults, trial)))


def _names(graph, nodes) -> str:
    return " ".join(graph.name(u) for u in sorted(nodes)) or "-"


def _edges(graph, edges) -> str:
    items = sorted(
        tuple(sorted((graph.name(a), graph.name(b)))) for a, b in edges
    )
    return " ".join(f"{a}-{b}" for a, b in items) or "-"


def _router_config(args, scheme: Scheme) -> RouterConfig:
    ex = scheme is Scheme.EXFASHION
    return RouterConfig(
        vcs=args.vcs,
        depth=args.depth,
        unified=ex if args.unified is None else args.unified,
        bidirectional=ex if args.bidirectional is None else args.bidirectional,
        sentinel=args.sentinel,
    )


def write_output(text: str, path: str | None) -> None:
    """Write ``text`` to ``path`` atomically, or to stdout."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _check_out_dir(path: str | None) -> None:
    if path is not None and not Path(path).resolve().parent.is_dir():
        raise UsageError(f"output directory of {path} does not exist")


# ---------------------------------------------------------------------------
# subcommands


def cmd_connectivity(args) -> tuple[str, str]:
    base = _base(args)
    for f in args.faults:
        if f > len(base.channels) + base.n:
            raise UsageError(f"{f} faults exceed the {len(base.channels) + base.n} elements")
    res = connectivity_campaign(
        (base.rows, base.cols), args.faults, args.trials, args.mode, args.seed,
        torus=base.kind == "torus", turns=args.turns, model=_model(args, 0),
    )
    lines = [f"{'faults':>6} {'cut-e':>8} {'full%':>8} {'dropped':>8}"]
    for r in res.rows:
        lines.append(
            f"{r.fault_count:>6} {float(r.avg_cut_elements):>8.3f} "
            f"{r.pct_fully_connected:>8.2f} {float(r.avg_dropped_nodes):>8.3f}"
        )
    return res.to_csv(), "\n".join(lines) + "\n"


def _reconfig_report(graph, args, root) -> tuple[list[str], bool]:
    lines = []
    results = sam.survey(graph, root, hop_latency=args.hop_latency, trace=args.trace)
    first = results[0]
    if args.trace:
        lines += first.trace
    r = oracle_components(graph)
    usable = len(graph.links())
    lines.append(f"root {graph.name(first.run.root)}")
    lines.append(f"gmax {len(r.gmax)} routers: {_names(graph, r.gmax)}")
    lines.append(f"root component: {_names(graph, first.visited)}")
    lines.append(f"out-of-service: {_names(graph, first.out_of_service(graph))}")
    cv = frozenset().union(*(x.cut_vertices for x in results))
    ce = frozenset().union(*(x.cut_edges for x in results))
    lines.append(f"cut vertices ({len(cv)}): {_names(graph, cv)}")
    lines.append(f"cut edges ({len(ce)}): {_edges(graph, ce)}")
    lines.append(
        f"search messages {first.run.message_count} (bound 2|L| = {usable}) "
        f"cycles {first.run.cycles}"
    )
    ok = first.run.message_count <= usable
    ocv, oce = cut_elements(graph, first.visited)
    match = ocv == first.cut_vertices and oce == first.cut_edges
    lines.append(f"oracle agreement: {'match' if match else 'MISMATCH'}")
    ok &= match

    nodes = r.gmax
    ft, state = fashion_reconfigure(graph, nodes, hop_latency=args.hop_latency, check=True)
    ut = updown_reconfigure(graph, nodes=nodes)
    for name, tables, cycles in (
        ("fashion", ft, state.cycles),
        ("updown", ut, first.run.cycles + 1),
    ):
        cyc = find_dependency_cycle(build_cdg(graph, tables))
        try:
            build_routing_tables(graph, tables)
            reach = "all pairs reachable"
        except ConnectivityError as exc:
            reach = f"UNREACHABLE ({exc})"
            ok = False
        ok &= cyc is None
        frac = forbidden_turn_fraction(tables, graph)
        verdict = "acyclic" if cyc is None else f"CYCLE {_edges(graph, cyc)}"
        lines.append(
            f"{name}: forbidden turns {float(frac):.4f} ({frac.numerator}/{frac.denominator}) "
            f"cdg {verdict}; {reach}; reconfiguration cycles {cycles}"
        )
        if name == "fashion":
            lines.append(f"fashion: iterations {state.iterations} max messages/search {state.max_messages_per_search}")
        if args.tables:
            lines += [f"  {x}" for x in dump_turn_tables(tables, graph).splitlines()]
    return lines, ok


def cmd_reconfig(args) -> tuple[str, str]:
    if args.scenario:
        try:
            topo = load_scenario(Path(args.scenario).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read scenario {args.scenario}: {exc.strerror}") from None
        except ScenarioError as exc:
            raise UsageError(f"{args.scenario}: {exc}") from None
    else:
        if len(args.faults) != 1:
            raise UsageError("reconfig takes a single fault count")
        topo = _faulted(args, _base(args), args.faults[0], 0)
    graph = effective_graph(topo, args.mode)
    if not list(graph.nodes()):
        raise UsageError("no healthy routers in the scenario")
    root = None
    if args.root is not None:
        try:
            root = sam.select_root(graph, topo.node_id(args.root))
        except (ValueError, TopologyError) as exc:
            raise UsageError(f"bad root {args.root!r}: {exc}") from None
    lines, ok = _reconfig_report(graph, args, root)
    text = "\n".join(lines) + "\n"
    if not ok:
        raise VerificationFailure(text)
    return text, ""


def _sim_cells(args, schemes):
    base = _base(args)
    for faults in args.faults:
        for trial in range(args.trials):
            topo = _faulted(args, base, faults, trial)
            seed = trial_seed(args.seed, faults, trial)
            for rate in args.rates:
                for scheme in schemes:
                    yield scheme, rate, faults, seed, topo


def _simulate(args, schemes):
    rows = []
    for scheme, rate, faults, seed, topo in _sim_cells(args, schemes):
        pat = TrafficPattern(args.pattern, rate, args.packet_size)
        m = run_simulation(
            topo, scheme, pat, args.cycles, args.warmup, seed=seed,
            config=_router_config(args, scheme), hop_latency=args.hop_latency,
        )
        if args.trace:
            log.warning("%s rate=%.4f faults=%d seed=%d latency=%.2f", scheme.value, rate, faults, seed, m.avg_latency)
        rows.append((scheme, args.pattern, rate, faults, seed, m))
    return rows


def cmd_simulate(args) -> tuple[str, str]:
    rows = _simulate(args, [Scheme(args.mode)])
    return metrics_csv(rows), ""


def cmd_campaign(args) -> tuple[str, str]:
    try:
        schemes = [Scheme(m) for m in args.mode]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = _simulate(args, schemes)
    lines = [f"{'scheme':<10} {'faults':>6} {'rate':>6} {'latency':>9} {'95% CI':>19} {'thru/node':>10}"]
    for faults in args.faults:
        for rate in args.rates:
            for s in schemes:
                ms = [m for sc, _, r, f, _, m in rows if sc is s and f == faults and r == rate]
                lat, lo, hi = mean_ci([m.avg_latency for m in ms])
                thr = sum(m.throughput_per_node for m in ms) / len(ms)
                lines.append(f"{s.value:<10} {faults:>6} {rate:>6.3f} {lat:>9.2f} [{lo:>8.2f},{hi:>8.2f}] {thr:>10.4f}")
    return metrics_csv(rows), "\n".join(lines) + "\n"


def cmd_oracle_check(args) -> tuple[str, str]:
    cases = []
    if args.scenario:
        try:
            cases.append(("scenario", load_scenario(Path(args.scenario).read_text())))
        except OSError as exc:
            raise UsageError(f"cannot read scenario {args.scenario}: {exc.strerror}") from None
        except ScenarioError as exc:
            raise UsageError(f"{args.scenario}: {exc}") from None
    else:
        base = _base(args)
        for faults in args.faults:
            for trial in range(args.trials):
                cases.append((f"faults={faults} trial={trial}", (faults, trial, base)))
    checked = 0
    for label, case in cases:
        if isinstance(case, tuple):
            faults, trial, base = case
            topo = _faulted(args, base, faults, trial)
            label = f"{label} seed={trial_seed(args.seed, faults, trial)}"
        else:
            topo = case
        g = effective_graph(topo, args.mode)
        if not list(g.nodes()):
            continue
        res = sam.run_search(g)
        comp = next(set(c) for c in oracle_components(g).components if res.run.root in c)
        cv, ce = cut_elements(g, comp)
        if res.visited != comp or res.cut_vertices != cv or res.cut_edges != ce:
            raise VerificationFailure(
                f"mismatch at {label}: search cut vertices {_names(g, res.cut_vertices)} "
                f"edges {_edges(g, res.cut_edges)}; oracle {_names(g, cv)} / {_edges(g, ce)}\n"
            )
        checked += 1
    return f"oracle-check: {checked} scenarios, 0 mismatches\n", ""


# ---------------------------------------------------------------------------
# entry point


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(format="%(message)s", stream=sys.stderr)
    try:
        args = parse_args(argv)
        _check_out_dir(getattr(args, "out", None))
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    if args.verbose:
        log.setLevel(logging.INFO)
    try:
        text, summary = args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except VerificationFailure as exc:
        sys.stderr.write(str(exc))
        return EXIT_VERIFY
    except (InvariantViolation, DeadlockError, RouterError) as exc:
        sys.stderr.write(f"invariant violation: {exc}\n")
        return EXIT_INVARIANT
    except TopologyError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    write_output(text, args.out)
    if summary:
        sys.stderr.write(summary)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
