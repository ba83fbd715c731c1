"""Walk through the planar stall: detection, closed-form length, brute force.

Run with ``python3 demos/stall_walkthrough.py``.
"""
import numpy as np

from dykstra_ff import RunOptions, canonical_instance, run_ff, run_observed
from dykstra_ff.harness.experiments import compare_runs


def first_cycle_below(trace, target, tol):
    """1-based cycle at which the end-of-cycle iterate is within ``tol``."""
    err = np.linalg.norm(trace.cycle_end_iterates() - target, axis=1)
    hit = np.flatnonzero(err <= tol)
    return int(hit[0]) + 1 if hit.size else None


def main():
    poly, x0 = canonical_instance()
    target = np.array([0.0, 1.0])
    print(f"{poly.n} half-spaces in R^{poly.dim}, x0 = {x0}")

    plain = run_observed(poly, x0, RunOptions())
    ev = plain.stall_events[0]
    info = ev.info
    print(f"stall detected at iteration {ev.at}")
    print(f"  candidates {info.candidates}, residuals {info.residuals}")
    print(f"  n_stall = {info.n_stall}, i_stall = {info.i_stall}")

    comp = compare_runs(poly, x0)
    for chk in comp.checks[:1]:
        print(f"  brute force counts {chk.brute} cycles")

    ff = run_ff(poly, x0, RunOptions())
    print(f"plain run: {len(plain.records)} iterations, "
          f"fast-forward: {len(ff.records)}")
    a = first_cycle_below(plain, target, 1e-6)
    b = first_cycle_below(ff, target, 1e-6)
    print(f"within 1e-6 of (0, 1): cycle {a} plain, cycle {b} fast-forward")
    print(f"excised traces differ by at most {comp.deviation:.1e}")


if __name__ == "__main__":
    main()
