"""How much of an 8x8 mesh survives random permanent faults.

Each trial draws distinct faulty elements (links 24 times as likely as
routers), builds the usable graph and counts cut elements, fully connected
outcomes and healthy routers cut off from the largest component.  The
Ex-Fashion column salvages the surviving direction of half-broken links,
which is why it loses almost nothing.  The last two columns give the share
of through-turns each reconfiguration scheme forbids.
"""

from __future__ import annotations

import sys

from fashion_noc.sim import connectivity_campaign

TRIALS = int(sys.argv[1]) if len(sys.argv) > 1 else 500
COUNTS = [0, 10, 20, 30, 40, 50, 60]


def main() -> None:
    fashion = connectivity_campaign((8, 8), COUNTS, TRIALS, "fashion", seed=11, turns=True)
    ex = connectivity_campaign((8, 8), COUNTS, TRIALS, "exfashion", seed=11)
    print(f"{TRIALS} trials per row\n")
    print(f"{'faults':>6} | {'cut-e':>6} {'full %':>7} {'dropped':>7} | {'ex cut-e':>8} {'ex full %':>9} | {'F turns':>7} {'U*D* turns':>10}")
    for f in COUNTS:
        a, b = fashion.row(f), ex.row(f)
        print(
            f"{f:>6} | {float(a.avg_cut_elements):>6.2f} {a.pct_fully_connected:>7.2f} "
            f"{float(a.avg_dropped_nodes):>7.2f} | {float(b.avg_cut_elements):>8.2f} "
            f"{b.pct_fully_connected:>9.2f} | {100 * a.forbidden_fashion:>6.2f}% {100 * a.forbidden_updown:>9.2f}%"
        )
    print("\nCSV form of the Fashion rows:\n")
    print(fashion.to_csv(), end="")


if __name__ == "__main__":
    main()
