"""Plain-versus-fast-forward comparisons.

The fast-forward run skips whole stalled cycles, so its step ``m`` matches
step ``trace.plain_counter(m)`` of the plain run. Comparing iterates through
that map is the excised-trace check.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import RunOptions, StallEvent, Trace, run
from ..oracle import brute_force_stall_count
from ..core import _iterate
from ..exceptions import InconsistentStallError, StallCountExceededError
from ..stall import (compute_stall_length, fast_forward_handler, jump_is_safe,
                     observe_stall, run_ff)

__all__ = [
    "BruteCheck",
    "Comparison",
    "excised_deviation",
    "with_brute_force",
    "run_checked",
    "compare_runs",
]


@dataclass(frozen=True)
class BruteCheck:
    at: int
    n_stall: int
    brute: int

    @property
    def agrees(self) -> bool:
        return self.n_stall == self.brute


def excised_deviation(plain: Trace, ff: Trace) -> tuple:
    """Largest per-coordinate gap between matched iterates, and how many matched.

    Fast-forward steps that map past the end of the plain run are ignored.
    """
    worst, matched = 0.0, 0
    n_plain = len(plain.records)
    for rec in ff.records:
        j = ff.plain_counter(rec.m)
        if j >= n_plain:
            break
        gap = float(np.max(np.abs(rec.x_after - plain.records[j].x_after)))
        worst = max(worst, gap)
        matched += 1
    return worst, matched


def with_brute_force(handler, log: list, rejected: Optional[list] = None):
    """Wrap a stall handler so each genuine stall is also counted by replay.

    Detections without a draining half-space, or whose window drift would
    not survive the jump (see :func:`jump_is_safe`), are not stalls in the
    exact sense; their iteration index goes to ``rejected`` instead. A
    replay that outlasts ten times the closed-form length is logged with
    ``brute = -1``.
    """
    def wrapped(state, poly, trace) -> Optional[StallEvent]:
        try:
            info = compute_stall_length(state, poly)
        except InconsistentStallError:
            info = None
        if info is None or not jump_is_safe(state, info, trace.eps_stall):
            if rejected is not None:
                rejected.append(state.m)
            return handler(state, poly, trace)
        try:
            brute = brute_force_stall_count(state, poly, max_cycles=10 * info.n_stall + 100,
                                            eps_stall=trace.eps_stall)
        except StallCountExceededError:
            brute = -1
        log.append(BruteCheck(state.m, info.n_stall, brute))
        return handler(state, poly, trace)
    return wrapped


def run_checked(poly, x0, opts: Optional[RunOptions] = None, *, fast_forward: bool) -> tuple:
    """Run plain or fast-forward Dykstra, checking every stall against brute force.

    Returns ``(trace, checks, rejected)``.
    """
    opts = RunOptions() if opts is None else opts
    checks: list = []
    rejected: list = []
    if fast_forward:
        trace = _iterate(poly, x0, opts, mode="dykstra_ff", use_aux=True,
                         on_stall=with_brute_force(fast_forward_handler, checks, rejected))
    else:
        trace = run(poly, x0, opts,
                    on_stall=with_brute_force(observe_stall, checks, rejected))
    return trace, checks, rejected


@dataclass
class Comparison:
    plain: Trace
    ff: Trace
    checks: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    deviation: float = 0.0
    matched: int = 0

    @property
    def cycles_saved(self) -> int:
        return self.ff.cycles_skipped

    @property
    def iterations_saved(self) -> int:
        return self.plain.iterations - self.ff.iterations

    @property
    def formula_agrees(self) -> bool:
        return all(c.agrees for c in self.checks)

    @property
    def identical(self) -> bool:
        if len(self.plain.records) != len(self.ff.records):
            return False
        return all(np.array_equal(a.x_after, b.x_after)
                   for a, b in zip(self.plain.records, self.ff.records))


def compare_runs(poly, x0, opts: Optional[RunOptions] = None, *, check: bool = True) -> Comparison:
    """Run both solvers on one problem and match their traces."""
    opts = RunOptions() if opts is None else opts
    plain_opts = dataclasses.replace(opts, mode="dykstra")
    ff_opts = dataclasses.replace(opts, mode="dykstra_ff")
    if check:
        plain, checks_p, rej_p = run_checked(poly, x0, plain_opts, fast_forward=False)
        ff, checks_f, rej_f = run_checked(poly, x0, ff_opts, fast_forward=True)
        checks = checks_p + checks_f
        rejected = rej_p + rej_f
    else:
        plain = run(poly, x0, plain_opts, on_stall=observe_stall)
        ff = run_ff(poly, x0, ff_opts)
        checks, rejected = [], []
    dev, matched = excised_deviation(plain, ff)
    return Comparison(plain, ff, checks, rejected, dev, matched)
