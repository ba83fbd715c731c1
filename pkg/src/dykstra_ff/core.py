"""Plain Dykstra iteration for polyhedra, the MAP baseline, and run traces.

For a half-space the Dykstra correction vector is always a nonnegative
multiple of the unit normal, so the solver stores one scalar ``k[i]`` per
half-space instead of a vector. Iteration ``m`` visits half-space
``m % n``:

* ``y = x + k[i] * a_i``; if ``y`` lies in ``H_i`` the step is *inactive*:
  ``x <- y`` and ``k[i] <- 0``;
* otherwise the step is *projected*: with ``r = a_i @ x - b_i``,
  ``x <- x - r * a_i`` and ``k[i] <- k[i] + r`` (which is then > 0).

The method of alternating projections is the same loop with ``k`` held at
zero.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import DimensionMismatchError, NumericalFailureError
from .geometry import Polyhedron

__all__ = [
    "MODES",
    "INACTIVE",
    "PROJECTED",
    "AUX_EXHAUSTION_RTOL",
    "AUX_NOISE_RTOL",
    "aux_floor",
    "RunOptions",
    "SolverState",
    "TraceRecord",
    "StallEvent",
    "Trace",
    "initial_state",
    "dykstra_step",
    "run",
    "run_map",
    "error_metric",
    "normalize_mode",
]

MODES = ("dykstra", "dykstra_ff", "map")
INACTIVE = "inactive"
PROJECTED = "projected"

# Relative size below which a decaying auxiliary scalar counts as exhausted.
# Shared by the closed-form stall length and the brute-force counter so that
# both agree when the exact-arithmetic ratio is an integer.
AUX_EXHAUSTION_RTOL = 1e-9

# Auxiliary scalars below this multiple of max(1, ||x||) are rounding residue
# (e.g. left over when a projection cancels almost exactly) and count as zero
# when deciding which half-spaces take part in a stall.
AUX_NOISE_RTOL = 1e-14


def aux_floor(x) -> float:
    """Size below which an auxiliary scalar at iterate ``x`` is treated as zero."""
    return AUX_NOISE_RTOL * max(1.0, float(np.linalg.norm(x)))


def normalize_mode(mode: str) -> str:
    m = str(mode).strip().lower().replace("-", "_")
    if m not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return m


@dataclass
class RunOptions:
    """Controls for :func:`run`, :func:`run_map` and ``run_ff``.

    Parameters
    ----------
    max_iter : int
        Hard cap on the number of executed iterations.
    eps_stall : float, optional
        Stall-detection threshold. ``None`` means ``1e-10 * (1 + ||x0||)``.
    tol_feas : float
        Maximum constraint violation accepted by the convergence stop.
    tol_conv : float
        Maximum per-iteration movement during the stationary cycle that
        triggers the convergence stop.
    mode : {"dykstra", "dykstra_ff", "map"}
    reference : array_like, optional
        Known projection; when given every record carries ``error_sq``.
    early_stop : bool
        Disable to run exactly ``max_iter`` iterations.
    """

    max_iter: int = 10000
    eps_stall: Optional[float] = None
    tol_feas: float = 1e-9
    tol_conv: float = 1e-12
    mode: str = "dykstra"
    reference: Optional[np.ndarray] = None
    early_stop: bool = True

    def __post_init__(self):
        self.mode = normalize_mode(self.mode)
        if self.reference is not None:
            self.reference = np.asarray(self.reference, dtype=float)

    def validate(self, n: int) -> None:
        if int(self.max_iter) != self.max_iter or self.max_iter < n:
            raise ValueError(f"max_iter must be an integer >= n = {n}")
        for name in ("tol_feas", "tol_conv"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eps_stall is not None and not self.eps_stall > 0:
            raise ValueError("eps_stall must be positive")

    def stall_tolerance(self, x0) -> float:
        if self.eps_stall is not None:
            return float(self.eps_stall)
        return 1e-10 * (1.0 + float(np.linalg.norm(x0)))


@dataclass
class SolverState:
    """Mutable state of one run.

    ``m`` is the index of the current iterate ``x`` (the next step visits
    half-space ``m % n``), ``k[i]`` the auxiliary scalar of half-space
    ``i`` and ``window`` the most recent iterates, ``window[-1] is x``,
    holding up to ``2n`` entries.
    """

    m: int
    x: np.ndarray
    k: np.ndarray
    window: deque

    @property
    def n(self) -> int:
        return self.k.shape[0]

    def copy(self) -> "SolverState":
        return SolverState(self.m, self.x.copy(), self.k.copy(),
                           deque((w.copy() for w in self.window), maxlen=self.window.maxlen))

    def iterate_at(self, counter: int) -> np.ndarray:
        """Iterate ``x_counter`` if it is still in the window."""
        back = self.m - counter
        if back < 0 or back >= len(self.window):
            raise IndexError(f"iterate {counter} is outside the window")
        return self.window[-1 - back]

    def aux_vectors(self, poly: Polyhedron) -> np.ndarray:
        """Correction vectors ``e_i = k[i] * a_i`` as rows."""
        return self.k[:, None] * poly.A


@dataclass
class TraceRecord:
    m: int
    cycle: int
    halfspace: int
    branch: str
    x_after: np.ndarray
    k_after: float
    residual: float
    stalled: bool = False
    ff_event: Optional[tuple] = None
    error_sq: Optional[float] = None


@dataclass
class StallEvent:
    """A detected stall; ``applied`` is true when it was fast-forwarded."""

    at: int
    n_stall: int
    i_stall: int
    skip_cycles: int
    applied: bool
    info: object = None


@dataclass
class Trace:
    mode: str
    n: int
    dim: int
    x0: np.ndarray
    eps_stall: float
    reference: Optional[np.ndarray] = None
    records: list = field(default_factory=list)
    stall_events: list = field(default_factory=list)
    x: Optional[np.ndarray] = None
    converged: bool = False
    k: Optional[np.ndarray] = None

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def cycles_completed(self) -> int:
        return len(self.records) // self.n

    @property
    def ff_events(self) -> list:
        return [e for e in self.stall_events if e.applied]

    @property
    def cycles_skipped(self) -> int:
        return sum(e.skip_cycles for e in self.ff_events)

    def iterates(self) -> np.ndarray:
        """Executed iterates ``x_1, x_2, ...`` as rows (``x0`` excluded)."""
        if not self.records:
            return np.empty((0, self.dim))
        return np.array([r.x_after for r in self.records])

    def cycle_end_iterates(self) -> np.ndarray:
        """Iterate after the last step of every completed cycle."""
        X = self.iterates()
        return X[self.n - 1:self.cycles_completed * self.n:self.n]

    def plain_counter(self, m: int) -> int:
        """Iteration index of the plain run that record ``m`` corresponds to."""
        shift = sum(e.skip_cycles for e in self.ff_events if e.at <= m)
        return m + shift * self.n


def initial_state(poly: Polyhedron, x0) -> SolverState:
    x0 = np.array(x0, dtype=float)
    if x0.ndim != 1 or x0.shape[0] != poly.dim:
        raise DimensionMismatchError(f"x0 must have length {poly.dim}")
    if not np.all(np.isfinite(x0)):
        raise NumericalFailureError("initial point is not finite")
    window = deque([x0.copy()], maxlen=2 * poly.n)
    return SolverState(0, x0, np.zeros(poly.n), window)


def dykstra_step(state: SolverState, poly: Polyhedron, *, use_aux: bool = True) -> TraceRecord:
    """Advance ``state`` by one iteration in place and return its record.

    With ``use_aux=False`` the auxiliary scalars are ignored and left at
    zero, which turns the step into a plain alternating projection.
    """
    n = poly.n
    i = state.m % n
    a = poly.A[i]
    b = poly.b[i]
    x = state.x
    r = float(a @ x) - b
    k_prev = float(state.k[i]) if use_aux else 0.0
    y = x + k_prev * a
    if float(a @ y) - b <= 0.0:
        x_new, k_new, branch = y, 0.0, INACTIVE
    else:
        x_new, k_new, branch = x - r * a, k_prev + r, PROJECTED
    if not np.all(np.isfinite(x_new)):
        raise NumericalFailureError(f"non-finite iterate at iteration {state.m}")
    if use_aux:
        state.k[i] = k_new
    else:
        k_new = 0.0
    rec = TraceRecord(state.m, state.m // n, i, branch, x_new, k_new, r)
    state.x = x_new
    state.m += 1
    state.window.append(x_new)
    return rec


def error_metric(x, x_star) -> float:
    """Squared Euclidean distance ``||x - x_star||^2``."""
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if x.shape != x_star.shape:
        raise DimensionMismatchError(f"shapes {x.shape} and {x_star.shape} differ")
    d = x - x_star
    return float(d @ d)


StallHandler = Callable[[SolverState, Polyhedron, Trace], Optional[StallEvent]]


def _iterate(poly: Polyhedron, x0, opts: RunOptions, *, mode: str, use_aux: bool,
             on_stall: Optional[StallHandler] = None) -> Trace:
    n = poly.n
    opts.validate(n)
    state = initial_state(poly, x0)
    eps = opts.stall_tolerance(state.x)
    ref = opts.reference
    if ref is not None and ref.shape != state.x.shape:
        raise DimensionMismatchError("reference point has the wrong dimension")
    trace = Trace(mode, n, poly.dim, state.x.copy(), eps, ref)
    records = trace.records
    window = state.window

    stall_streak = 0   # consecutive steps whose iterate repeats the one a cycle back
    still_streak = 0   # consecutive steps that left the iterate (almost) in place
    episode_handled = False
    while state.m < opts.max_iter:
        x_before = state.x
        rec = dykstra_step(state, poly, use_aux=use_aux)
        x = state.x
        if len(window) > n and np.linalg.norm(x - window[-1 - n]) < eps:
            stall_streak += 1
        else:
            stall_streak = 0
            episode_handled = False
        if np.linalg.norm(x - x_before) <= opts.tol_conv:
            still_streak += 1
        else:
            still_streak = 0
        rec.stalled = stall_streak >= n and len(window) == 2 * n
        if ref is not None:
            rec.error_sq = error_metric(x, ref)
        records.append(rec)

        if still_streak >= n and poly.max_violation(x) <= opts.tol_feas:
            trace.converged = True
            if opts.early_stop:
                break
        if rec.stalled and on_stall is not None and not episode_handled:
            episode_handled = True
            event = on_stall(state, poly, trace)
            if event is not None:
                trace.stall_events.append(event)
                if event.applied:
                    rec.ff_event = (event.n_stall, event.i_stall)

    trace.x = state.x.copy()
    trace.k = state.k.copy()
    if not trace.converged:
        trace.converged = still_streak >= n and poly.max_violation(state.x) <= opts.tol_feas
    return trace


def run(poly: Polyhedron, x0, opts: Optional[RunOptions] = None, *,
        on_stall: Optional[StallHandler] = None) -> Trace:
    """Plain Dykstra projection of ``x0`` onto ``poly``.

    Stops after ``opts.max_iter`` iterations or, with ``early_stop``, once a
    full cycle leaves a feasible iterate in place. ``on_stall`` is called
    once per detected stall episode and may return a :class:`StallEvent`
    to be logged in the trace.
    """
    opts = RunOptions() if opts is None else opts
    return _iterate(poly, x0, opts, mode="dykstra", use_aux=True, on_stall=on_stall)


def run_map(poly: Polyhedron, x0, opts: Optional[RunOptions] = None) -> Trace:
    """Cyclic projections without corrections (method of alternating projections).

    The limit is feasible but in general not the projection of ``x0``.
    """
    opts = RunOptions(mode="map") if opts is None else opts
    return _iterate(poly, x0, opts, mode="map", use_aux=False)
