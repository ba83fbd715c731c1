"""Dykstra's projection algorithm for polyhedra with stall fast-forwarding."""
from .core import (RunOptions, SolverState, Trace, TraceRecord, dykstra_step,
                   error_metric, initial_state, run, run_map)
from .exceptions import *  # noqa: F401,F403
from .geometry import (Activity, ActivityReport, HalfSpace, Polyhedron,
                       classify_activity, equality_to_halfspaces, make_halfspace,
                       polyhedron_from_constraints, project_halfspace, violation)
from .oracle import (InstanceSpec, OracleSolution, brute_force_stall_count,
                     oracle_project, canonical_instance, random_instance,
                     stall_inducing_instance)
from .stall import (StallInfo, compute_stall_length, detect_stall, fast_forward,
                    run_ff, run_observed)

__version__ = "0.1.0"


def solve(poly, x0, opts=None):
    """Run the solver selected by ``opts.mode``."""
    opts = RunOptions() if opts is None else opts
    if opts.mode == "map":
        return run_map(poly, x0, opts)
    if opts.mode == "dykstra_ff":
        return run_ff(poly, x0, opts)
    return run_observed(poly, x0, opts)
