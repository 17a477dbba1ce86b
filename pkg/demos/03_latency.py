"""Packet latency of Fashion and Up*/Down* routing on faulty meshes.

Both schemes see the same fault sets and the same traffic (uniform random,
8-flit packets, 4 VCs of 8 flits per port).  The table sweeps the offered
load; latency counts from packet generation to tail ejection, so it grows
sharply as a scheme approaches saturation.  The last block is a saturation
probe where sources offer far more than the network can carry.
"""

from __future__ import annotations

import sys

from fashion_noc.router import RouterConfig
from fashion_noc.sim import TrafficPattern, mean_ci, run_simulation, trial_seed
from fashion_noc.topo import FaultModel, build_mesh, inject_faults

SEEDS = int(sys.argv[1]) if len(sys.argv) > 1 else 5
CYCLES, WARMUP = 30_000, 5_000
MESH = build_mesh(8, 8)


def topo(faults, s):
    return inject_faults(MESH, faults, FaultModel(seed=trial_seed(3, faults, s))) if faults else MESH


def main() -> None:
    print(f"{SEEDS} fault sets per cell, {CYCLES - WARMUP} measured cycles\n")
    print(f"{'faults':>6} {'load':>5} | {'Fashion':>18} | {'Up*/Down*':>18}")
    for faults in (0, 10):
        for load in (0.02, 0.05, 0.08):
            cells = []
            for scheme in ("fashion", "updown"):
                lat = [
                    run_simulation(topo(faults, s), scheme, TrafficPattern("uniform", load), CYCLES, WARMUP, seed=s).avg_latency
                    for s in range(SEEDS)
                ]
                m, lo, hi = mean_ci(lat)
                cells.append(f"{m:7.2f} +/- {hi - m:5.2f}")
            print(f"{faults:>6} {load:>5.2f} | {cells[0]:>18} | {cells[1]:>18}")

    print("\nsaturation throughput, flits/node/cycle at 0.5 offered")
    cfg = RouterConfig(sentinel="global")
    for scheme in ("fashion", "updown"):
        row = []
        for faults in (0, 5, 10, 15):
            xs = [
                run_simulation(topo(faults, s), scheme, TrafficPattern("uniform", 0.5), 10_000, 2_000, seed=s, config=cfg).throughput_per_node
                for s in range(SEEDS)
            ]
            row.append(f"{faults:>2} faults {sum(xs) / len(xs):.4f}")
        print(f"  {scheme:<8} " + "  ".join(row))


if __name__ == "__main__":
    main()
