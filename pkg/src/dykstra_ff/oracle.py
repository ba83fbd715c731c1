"""Ground truth for the solvers: exact projection, stall counting, instances.

Nothing here shares code paths with the closed-form stall analysis. The
exact projection enumerates candidate active sets and solves the KKT system
of each; the stall counter simply replays plain Dykstra steps.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (AUX_EXHAUSTION_RTOL, INACTIVE, PROJECTED, RunOptions, SolverState, aux_floor,
                   dykstra_step, run)
from .exceptions import (EnumerationLimitError, InfeasibleProblemError,
                         StallCountExceededError)
from .geometry import Polyhedron, equality_to_halfspaces, make_halfspace

__all__ = [
    "OracleSolution",
    "InstanceSpec",
    "MAX_ENUMERATION_N",
    "oracle_project",
    "brute_force_stall_count",
    "random_instance",
    "canonical_instance",
    "stall_inducing_instance",
    "first_stall_state",
    "multi_stall_instance",
]

MAX_ENUMERATION_N = 12
_FEAS_TOL = 1e-9
_DUAL_TOL = 1e-12


@dataclass(frozen=True)
class OracleSolution:
    x_star: np.ndarray
    active_set: tuple
    multipliers: tuple
    x0: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.x0 - self.x_star))

    def kkt_residuals(self) -> dict:
        """Primal, stationarity and dual residuals, recomputed from scratch."""
        primal = max(0.0, float(np.max(self.A @ self.x_star - self.b)))
        grad = self.x0 - self.x_star
        if self.active_set:
            grad = grad - self.A[list(self.active_set)].T @ np.asarray(self.multipliers)
        dual = max([0.0] + [-float(lam) for lam in self.multipliers])
        return {"primal": primal,
                "stationarity": float(np.linalg.norm(grad)),
                "dual": dual}


def oracle_project(poly: Polyhedron, x0, *, max_n: int = MAX_ENUMERATION_N) -> OracleSolution:
    """Exact Euclidean projection of ``x0`` onto ``poly`` by active-set enumeration.

    Each subset ``W`` of at most ``dim`` half-spaces with independent normals
    is treated as an equality-active set: ``x = x0 - A_W^T lam`` with
    ``A_W A_W^T lam = A_W x0 - b_W``. Among candidates that are primal
    feasible with ``lam >= 0``, the closest to ``x0`` is returned.

    Raises
    ------
    EnumerationLimitError
        If ``poly`` has more than ``max_n`` half-spaces.
    InfeasibleProblemError
        If no subset yields a KKT point (empty intersection).
    """
    A, b = poly.A, poly.b
    n, p = A.shape
    if n > max_n:
        raise EnumerationLimitError(f"{n} half-spaces exceed the enumeration limit {max_n}")
    x0 = np.asarray(x0, dtype=float)
    feas_tol = _FEAS_TOL * max(1.0, float(np.max(np.abs(b))))
    best = None
    for size in range(min(n, p) + 1):
        for W in itertools.combinations(range(n), size):
            if size == 0:
                x, lam = x0.copy(), np.empty(0)
            else:
                AW = A[list(W)]
                if np.linalg.matrix_rank(AW, tol=1e-10) < size:
                    continue
                lam = np.linalg.solve(AW @ AW.T, AW @ x0 - b[list(W)])
                if np.any(lam < -_DUAL_TOL):
                    continue
                x = x0 - AW.T @ lam
            if np.max(A @ x - b) > feas_tol:
                continue
            d = float(np.linalg.norm(x - x0))
            if best is None or d < best[0]:
                best = (d, x, W, lam)
    if best is None:
        raise InfeasibleProblemError("no KKT point found; is the intersection empty?")
    _, x, W, lam = best
    return OracleSolution(x, tuple(W), tuple(float(v) for v in lam), x0.copy(), A, b)


def brute_force_stall_count(state: SolverState, poly: Polyhedron, max_cycles: int = 10**6,
                            eps_stall: Optional[float] = None) -> int:
    """Count stalled cycles by replaying plain Dykstra from a stalled state.

    Starting at ``state`` (left untouched), cycles of ``n`` steps are run
    until a step stops repeating its counterpart one cycle earlier: the
    iterate moves by ``eps_stall`` or more, the branch flips, or a projected
    step leaves a numerically zero auxiliary. The 1-based index of that
    cycle is returned. Auxiliaries at rounding level
    (:func:`dykstra_ff.core.aux_floor`) count as zero throughout.
    """
    if max_cycles <= 0:
        raise ValueError("max_cycles must be positive")
    s = state.copy()
    n = s.n
    if eps_stall is None:
        eps_stall = 1e-10 * (1.0 + float(np.linalg.norm(s.x)))
    # k > 0 exactly when the latest visit was projected; rounding-level
    # scalars are read as zero so their harmless flips do not count
    floor = aux_floor(s.x)
    live = s.k > floor
    last_branch = [PROJECTED if v else INACTIVE for v in live]
    k_start = s.k.copy()
    for cycle in range(1, max_cycles + 1):
        for _ in range(n):
            rec = dykstra_step(s, poly)
            i = rec.halfspace
            moved = np.linalg.norm(s.window[-1] - s.window[-1 - n]) >= eps_stall
            flipped = rec.branch != last_branch[i] and (live[i] or rec.k_after > floor)
            drained = (live[i] and rec.branch == PROJECTED and rec.residual < 0
                       and rec.k_after <= AUX_EXHAUSTION_RTOL * k_start[i])
            if moved or flipped or drained:
                return cycle
            last_branch[i] = rec.branch
    raise StallCountExceededError(f"stall did not end within {max_cycles} cycles")


def first_stall_state(poly: Polyhedron, x0, *, eps_stall: Optional[float] = None,
                      max_iter: int = 100000) -> Optional[SolverState]:
    """Plain-run state at the first stall detection, or None if there is none."""
    from .core import initial_state
    from .stall import detect_stall

    s = initial_state(poly, x0)
    eps = 1e-10 * (1.0 + float(np.linalg.norm(s.x))) if eps_stall is None else eps_stall
    while s.m < max_iter:
        dykstra_step(s, poly)
        if detect_stall(s, eps):
            return s
        if s.m % poly.n == 0 and _settled(s, poly):
            return None
    return None


def _settled(s: SolverState, poly: Polyhedron) -> bool:
    w = s.window
    if len(w) <= poly.n:
        return False
    return (all(np.array_equal(w[-1], w[-1 - j]) for j in range(1, poly.n + 1))
            and poly.max_violation(s.x) <= _FEAS_TOL)


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for :func:`random_instance`.

    ``slack`` bounds the depth of the anchor point inside each half-space.
    """

    seed: int
    p: int = 2
    n: int = 4
    slack: tuple = (0.05, 1.0)
    stall_inducing: bool = False

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise ValueError("p and n must be positive")
        lo, hi = self.slack
        if not 0 < lo <= hi:
            raise ValueError("slack must satisfy 0 < lo <= hi")
        if self.stall_inducing and self.p != 2:
            raise ValueError("stall-inducing instances are planar (p = 2)")


def random_instance(spec: InstanceSpec, *, return_anchor: bool = False):
    """Random polyhedron with a guaranteed interior point, and an outside ``x0``.

    Normals are uniform on the sphere; each offset is ``a @ z + slack`` for a
    Gaussian anchor ``z``. ``x0`` is resampled until it violates at least one
    constraint by more than the smallest slack.
    """
    if spec.stall_inducing:
        poly, x0 = stall_inducing_instance(spec.seed)
        return (poly, x0, None) if return_anchor else (poly, x0)
    rng = np.random.default_rng(spec.seed)
    z = rng.standard_normal(spec.p)
    normals = rng.standard_normal((spec.n, spec.p))
    lo, hi = spec.slack
    slack = rng.uniform(lo, hi, size=spec.n)
    hs = []
    for a, s in zip(normals, slack):
        # a zero draw has probability zero; guard anyway
        if not np.any(a):
            a = np.ones(spec.p)
        h = make_halfspace(a, 0.0)
        hs.append(make_halfspace(h.normal, float(h.normal @ z) + s))
    poly = Polyhedron(tuple(hs))
    while True:
        u = rng.standard_normal(spec.p)
        x0 = z + rng.uniform(1.0, 4.0) * u / np.linalg.norm(u) * (1.0 + hi)
        if np.max(poly.residuals(x0)) > lo:
            break
    return (poly, x0, z) if return_anchor else (poly, x0)


def canonical_instance() -> tuple:
    """Box ``[-1, 1]^2`` cut by the line through (0, 1) and (2, 0), x0 = (-4, 1.4).

    Half-space order: ``x <= 1``, ``-x <= 1``, ``y <= 1``, ``-y <= 1``, then
    the line ``x + 2y = 2`` as its ``<=`` and ``>=`` halves.
    """
    box = [((1.0, 0.0), 1.0), ((-1.0, 0.0), 1.0), ((0.0, 1.0), 1.0), ((0.0, -1.0), 1.0)]
    hs = [make_halfspace(a, b) for a, b in box]
    hs.extend(equality_to_halfspaces((1.0, 2.0), 2.0))
    return Polyhedron(tuple(hs)), np.array([-4.0, 1.4])


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _box_line(half_w, half_h, apex_x, slope) -> Polyhedron:
    box = [((1.0, 0.0), half_w), ((-1.0, 0.0), half_w),
           ((0.0, 1.0), half_h), ((0.0, -1.0), half_h)]
    hs = [make_halfspace(a, b) for a, b in box]
    # line through (apex_x, half_h) with slope -slope: slope*x + y = slope*apex_x + half_h
    hs.extend(equality_to_halfspaces((slope, 1.0), slope * apex_x + half_h))
    return Polyhedron(tuple(hs))


def stall_inducing_instance(seed: int, *, min_length: int = 2, max_tries: int = 200) -> tuple:
    """Box-and-line instance on which plain Dykstra stalls.

    Seed 0 returns :func:`canonical_instance`. Other seeds draw the box
    proportions, the line through the top edge, and a starting point far to
    the left just above the top face, then apply a random rotation, scaling
    and translation. Each draw is checked by replaying plain Dykstra; draws
    whose first stall is shorter than ``min_length`` cycles are rejected.
    """
    if seed == 0:
        return canonical_instance()
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        half_w = rng.uniform(0.5, 2.0)
        half_h = rng.uniform(0.5, 2.0)
        apex_x = rng.uniform(-0.5, 0.5) * half_w
        slope = rng.uniform(0.2, 1.0)
        base = _box_line(half_w, half_h, apex_x, slope)
        # start left of the box, between the top face and the line
        x_far = -half_w * rng.uniform(2.0, 10.0)
        y_line = slope * (apex_x - x_far) + half_h
        y0 = half_h + rng.uniform(0.05, 0.95) * (y_line - half_h)
        Q = _rotation(rng.uniform(0.0, 2.0 * math.pi))
        scale = float(np.exp(rng.uniform(-1.0, 2.0)))
        shift = rng.uniform(-5.0, 5.0, size=2)
        poly = base.transformed(Q, shift, scale)
        x0 = scale * (Q @ np.array([x_far, y0])) + shift
        state = first_stall_state(poly, x0, max_iter=20000)
        if state is None:
            continue
        try:
            length = brute_force_stall_count(state, poly, max_cycles=100000)
        except StallCountExceededError:
            continue
        if length >= min_length:
            return poly, x0
    raise RuntimeError(f"no stalling instance found for seed {seed} in {max_tries} tries")


def multi_stall_instance(seed: int, *, min_stalls: int = 2, max_tries: int = 500) -> tuple:
    """Box in R^3 cut by one or two planes on which plain Dykstra stalls repeatedly.

    Draws are replayed with the fast-forwarding solver and kept once it
    reports at least ``min_stalls`` separate jumps.
    """
    from .stall import run_ff

    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        hs = []
        for e in np.eye(3):
            w = rng.uniform(0.5, 2.0)
            hs += [make_halfspace(e, w), make_halfspace(-e, w)]
        for _ in range(int(rng.integers(1, 3))):
            hs.extend(equality_to_halfspaces(rng.standard_normal(3), rng.uniform(-0.3, 0.3)))
        poly = Polyhedron(tuple(hs))
        x0 = rng.standard_normal(3) * rng.uniform(2.0, 10.0)
        trace = run_ff(poly, x0, RunOptions(max_iter=20000))
        if len(trace.ff_events) >= min_stalls:
            return poly, x0
    raise RuntimeError(f"no multi-stall instance found for seed {seed} in {max_tries} tries")


def reference_projection(poly: Polyhedron, x0) -> np.ndarray:
    """Oracle projection when enumeration is affordable, else a long Dykstra run."""
    if poly.n <= MAX_ENUMERATION_N:
        return oracle_project(poly, x0).x_star
    return run(poly, x0, RunOptions(max_iter=200000)).x
