"""Fast-forward on generated stall instances, checked against the oracle.

Run with ``python3 demos/random_stalls.py [count]``.
"""
import sys

import numpy as np

from dykstra_ff import oracle_project, run_ff, stall_inducing_instance
from dykstra_ff.oracle import multi_stall_instance
from dykstra_ff.harness.experiments import compare_runs


def report(label, poly, x0):
    comp = compare_runs(poly, x0)
    ff = comp.ff
    line = (f"{label}: n={poly.n} stalls={len(ff.stall_events)} "
            f"saved={comp.cycles_saved} cycles "
            f"formula/brute {sum(c.agrees for c in comp.checks)}/{len(comp.checks)} "
            f"dev={comp.deviation:.1e}")
    if poly.n <= 12:
        ref = oracle_project(poly, x0).x_star
        line += f" |x-x*|={np.linalg.norm(run_ff(poly, x0).x - ref):.1e}"
    print(line)


def main(count=5):
    for seed in range(count):
        poly, x0 = stall_inducing_instance(seed)
        report(f"stall seed {seed}", poly, x0)
    for seed in range(1, 3):
        poly, x0 = multi_stall_instance(seed)
        report(f"multi seed {seed}", poly, x0)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 5)
