"""Stall detection, closed-form stall length, and the fast-forward jump.

During a stall the iterates repeat with period ``n`` and every projected
half-space changes its auxiliary scalar by the same residual ``r_i`` each
cycle. Half-spaces with ``r_i < 0`` drain their scalar; the first one to run
dry ends the stall after ``ceil(k_i / -r_i)`` visits. Knowing that count,
all the repeated cycles can be replaced by one update of the scalars.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (AUX_EXHAUSTION_RTOL, RunOptions, aux_floor, SolverState, StallEvent,
                   Trace, _iterate)
from .exceptions import FastForwardConsistencyError, InconsistentStallError
from .geometry import Polyhedron

__all__ = [
    "StallInfo",
    "detect_stall",
    "stall_residuals",
    "compute_stall_length",
    "fast_forward",
    "jump_is_safe",
    "observe_stall",
    "fast_forward_handler",
    "run_ff",
    "run_observed",
]

log = logging.getLogger(__name__)

# Slack allowed when a surviving auxiliary lands slightly below zero.
_NEGATIVE_AUX_ATOL = 1e-9


@dataclass(frozen=True)
class StallInfo:
    """Closed-form description of a detected stall.

    Attributes
    ----------
    candidates : tuple of int
        Half-spaces able to end the stall, in increasing index order.
    per_candidate : dict
        Half-space index -> number of further visits until its auxiliary
        scalar is used up.
    residuals : dict
        Half-space index -> the (negative) constant residual.
    n_stall : int
        Minimum of ``per_candidate``.
    i_stall : int
        Half-space that ends the stall; ties go to the smallest index.
    skip_cycles : int
        Whole cycles that are exact repeats and can be skipped. Equals
        ``n_stall - 1`` unless the terminating scalar hits zero exactly, in
        which case the last visit still repeats and it equals ``n_stall``.
    detected_at : int
        Iteration index ``m`` of the state the analysis was made on.
    """

    candidates: tuple
    per_candidate: dict
    residuals: dict
    n_stall: int
    i_stall: int
    skip_cycles: int
    detected_at: int


def detect_stall(state: SolverState, eps_stall: float) -> bool:
    """True when each of the last ``n`` iterates repeats the one a cycle before.

    Needs ``2n`` iterates in the window; returns False before that.
    """
    if not eps_stall > 0:
        raise ValueError("eps_stall must be positive")
    n = state.n
    w = state.window
    if len(w) < 2 * n:
        return False
    return all(np.linalg.norm(w[-1 - i] - w[-1 - i - n]) < eps_stall for i in range(n))


def stall_residuals(state: SolverState, poly: Polyhedron) -> np.ndarray:
    """Residual each half-space sees at its next visit, assuming the stall goes on.

    The next visit to the half-space at offset ``o`` from ``state.m`` starts
    from ``x_{m+o}``, which in a stall equals ``x_{m+o-n}`` (in the window).
    """
    n = state.n
    r = np.empty(n)
    for o in range(n):
        i = (state.m + o) % n
        x_seen = state.iterate_at(state.m - n + o)
        r[i] = float(poly.A[i] @ x_seen) - poly.b[i]
    return r


def _visits_until_exhausted(k: float, r: float) -> tuple:
    # Returns (visits, exact): the visit at which k + visits * r <= 0, and
    # whether it lands on zero (that visit then still repeats the stall).
    q = k / -r
    nearest = round(q)
    if nearest >= 1 and abs(q - nearest) <= AUX_EXHAUSTION_RTOL * q:
        return int(nearest), True
    return max(1, math.ceil(q)), False


def compute_stall_length(state: SolverState, poly: Polyhedron) -> StallInfo:
    """Exact number of stalled cycles at a detected stall.

    For every half-space whose last visit was projected (``k > 0``) and whose
    residual is negative, the visit count ``ceil(k / -r)`` at which the
    scalar runs out is computed; the smallest one ends the stall. Scalars
    at rounding level (:func:`dykstra_ff.core.aux_floor`) are ignored.

    Raises
    ------
    InconsistentStallError
        If no half-space is draining, i.e. nothing can end the stall.
    """
    n = state.n
    if len(state.window) < n + 1:
        raise InconsistentStallError("window too short for stall analysis")
    r = stall_residuals(state, poly)
    floor = aux_floor(state.x)
    per, res, skip = {}, {}, {}
    for i in range(n):
        k = float(state.k[i])
        if k > floor and r[i] < 0.0:
            visits, exact = _visits_until_exhausted(k, float(r[i]))
            per[i] = visits
            res[i] = float(r[i])
            skip[i] = visits if exact else visits - 1
    if not per:
        raise InconsistentStallError(
            f"stall detected at m={state.m} but no auxiliary is draining")
    n_stall = min(per.values())
    i_stall = min(i for i in per if per[i] == n_stall)
    return StallInfo(candidates=tuple(per), per_candidate=per, residuals=res,
                     n_stall=n_stall, i_stall=i_stall,
                     skip_cycles=min(skip.values()), detected_at=state.m)


def fast_forward(state: SolverState, info: StallInfo, poly: Polyhedron) -> SolverState:
    """Apply ``info.skip_cycles`` stalled cycles to the auxiliaries in one update.

    Every projected half-space gets ``k += skip_cycles * r``; inactive ones
    keep ``k = 0``. The iterate, the window and the iteration index are left
    alone: the stall pattern is periodic, so the state afterwards equals the
    plain run's state ``skip_cycles * n`` iterations later.
    """
    if info.detected_at != state.m:
        raise FastForwardConsistencyError(
            f"stall info is for m={info.detected_at}, state is at m={state.m}")
    jump = info.skip_cycles
    if jump == 0:
        return state
    r = stall_residuals(state, poly)
    k_new = state.k.copy()
    for i in range(state.n):
        if state.k[i] <= 0.0:
            continue
        k_new[i] = state.k[i] + jump * r[i]
        if k_new[i] < 0.0:
            if k_new[i] < -_NEGATIVE_AUX_ATOL * max(1.0, state.k[i]):
                raise FastForwardConsistencyError(
                    f"auxiliary {i} would become {k_new[i]:.3e} after {jump} cycles")
            k_new[i] = 0.0
    state.k[:] = k_new
    return state


def _window_drift(state: SolverState) -> float:
    n = state.n
    w = state.window
    return max(float(np.linalg.norm(w[-1 - i] - w[-1 - i - n]))
               for i in range(min(n, len(w) - n)))


def jump_is_safe(state: SolverState, info: StallInfo, eps_stall: float) -> bool:
    """True when the window drift, extrapolated over the jump, stays below ``eps_stall``.

    In the slow tail of a convergent run the iterates can move by less than
    ``eps_stall`` per cycle without repeating; such detections yield huge,
    meaningless stall lengths and fail this check.
    """
    return info.skip_cycles * _window_drift(state) <= eps_stall


def observe_stall(state: SolverState, poly: Polyhedron, trace: Trace) -> Optional[StallEvent]:
    """Stall handler that only records the closed-form analysis."""
    try:
        info = compute_stall_length(state, poly)
    except InconsistentStallError as exc:
        log.debug("%s", exc)
        return None
    return StallEvent(state.m, info.n_stall, info.i_stall, info.skip_cycles, False, info)


def fast_forward_handler(state: SolverState, poly: Polyhedron, trace: Trace) -> Optional[StallEvent]:
    """Stall handler used by :func:`run_ff`."""
    try:
        info = compute_stall_length(state, poly)
    except InconsistentStallError as exc:
        log.debug("falling back to plain iteration: %s", exc)
        return None
    # Near a fixed point the window can look stalled while the iterate still
    # creeps; extrapolating that drift over the jump would corrupt the
    # auxiliaries, so such detections are ignored.
    if not jump_is_safe(state, info, trace.eps_stall):
        log.debug("ignoring approximate stall at m=%d (skip %d cycles)",
                  state.m, info.skip_cycles)
        return StallEvent(state.m, info.n_stall, info.i_stall, info.skip_cycles, False, info)
    if info.skip_cycles == 0:
        return StallEvent(state.m, info.n_stall, info.i_stall, 0, False, info)
    fast_forward(state, info, poly)
    log.debug("fast-forwarded %d cycles at m=%d (i_stall=%d)",
              info.skip_cycles, state.m, info.i_stall)
    return StallEvent(state.m, info.n_stall, info.i_stall, info.skip_cycles, True, info)


def run_ff(poly: Polyhedron, x0, opts: Optional[RunOptions] = None) -> Trace:
    """Dykstra's method with stall fast-forwarding.

    Same stopping rules as :func:`dykstra_ff.core.run`. Each detected stall
    is analysed once; if whole cycles repeat, they are skipped and the
    trace gets a :class:`StallEvent` with ``applied=True``.
    """
    opts = RunOptions(mode="dykstra_ff") if opts is None else opts
    return _iterate(poly, x0, opts, mode="dykstra_ff", use_aux=True,
                    on_stall=fast_forward_handler)


def run_observed(poly: Polyhedron, x0, opts: Optional[RunOptions] = None) -> Trace:
    """Plain Dykstra that also logs the stall analysis of every stall it hits."""
    opts = RunOptions() if opts is None else opts
    return _iterate(poly, x0, opts, mode="dykstra", use_aux=True, on_stall=observe_stall)
