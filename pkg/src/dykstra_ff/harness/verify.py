"""Seeded property suites behind ``dykstra-ff verify``.

Every seed drives one random feasible instance (``p = 2 + seed % 4``,
``n = 3 + seed % 6``) and one stall-inducing instance. A suite either
passes on a seed or yields a :class:`Failure` naming the seed to replay.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from ..core import PROJECTED, RunOptions, _iterate, run, run_map
from ..exceptions import DykstraError, InconsistentStallError
from ..geometry import Polyhedron, project_halfspace, violation
from ..oracle import (InstanceSpec, oracle_project, random_instance,
                      stall_inducing_instance)
from ..stall import compute_stall_length, jump_is_safe, stall_residuals
from ..core import StallEvent
from .experiments import compare_runs, excised_deviation

__all__ = [
    "SUITES",
    "Failure",
    "VerifyReport",
    "vector_dykstra",
    "random_case",
    "mutated_ff_handler",
    "run_suites",
]

STEP_FEAS_RTOL = 1e-12
PARALLEL_TOL = 1e-12
ORACLE_TOL = 1e-4
KKT_TOL = 1e-9
TRACE_TOL_PLANAR = 1e-9
TRACE_TOL_RANDOM = 1e-7


@dataclass(frozen=True)
class Failure:
    suite: str
    seed: int
    detail: str


@dataclass
class VerifyReport:
    seeds: tuple
    passed: dict
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self) -> list:
        out = []
        for name in self.passed:
            bad = [f for f in self.failures if f.suite == name]
            out.append(f"{name:<20} pass {self.passed[name]:>4}  fail {len(bad):>4}")
        for f in self.failures:
            out.append(f"FAIL {f.suite} seed={f.seed}: {f.detail}")
        return out


def random_case(seed: int):
    return random_instance(InstanceSpec(seed=seed, p=2 + seed % 4, n=3 + seed % 6))


def vector_dykstra(poly: Polyhedron, x0, iters: int) -> np.ndarray:
    """Textbook Dykstra with one full correction vector per set.

    Returns the iterates ``x_1..x_iters`` as rows.
    """
    n = poly.n
    x = np.array(x0, dtype=float)
    e = np.zeros((n, poly.dim))
    out = np.empty((iters, poly.dim))
    for m in range(iters):
        i = m % n
        y = x + e[i]
        x = project_halfspace(y, poly[i])
        e[i] = y - x
        out[m] = x
    return out


def _k_sign(seed, plain, poly, x0):
    for r in plain.records:
        if r.k_after < 0.0:
            return f"k<0 at m={r.m}"
        if (r.k_after > 0.0) != (r.branch == PROJECTED):
            return f"k/branch mismatch at m={r.m}"
    return None


def _parallel(seed, plain, poly, x0):
    X = plain.iterates()
    V = vector_dykstra(poly, x0, len(X))
    scale = max(1.0, float(np.max(np.abs(X)))) if len(X) else 1.0
    gap = float(np.max(np.abs(X - V))) if len(X) else 0.0
    return None if gap <= PARALLEL_TOL * scale else f"scalar/vector gap {gap:.3e}"


def _step_feasibility(seed, plain, poly, x0):
    for r in plain.records:
        v = violation(r.x_after, poly[r.halfspace])
        if v > STEP_FEAS_RTOL * max(1.0, float(np.linalg.norm(r.x_after))):
            return f"violation {v:.3e} after m={r.m}"
    return None


def _map_recovery(seed, plain, poly, x0):
    tr = run_map(poly, x0, RunOptions(max_iter=200, early_stop=False, mode="map"))
    x = np.array(x0, dtype=float)
    for r in tr.records:
        x = project_halfspace(x, poly[r.halfspace])
        if not np.array_equal(x, r.x_after):
            return f"MAP differs from cyclic projections at m={r.m}"
    return None


def _oracle(seed, plain, poly, x0):
    sol = oracle_project(poly, x0)
    res = sol.kkt_residuals()
    if max(res.values()) > KKT_TOL:
        return f"oracle KKT residuals {res}"
    ff = compare_runs(poly, x0, check=False).ff
    for name, tr in (("dykstra", plain), ("dykstra_ff", ff)):
        d = float(np.linalg.norm(tr.x - sol.x_star))
        if d > ORACLE_TOL:
            return f"{name} ends {d:.3e} from the oracle"
    return None


RANDOM_SUITES = {
    "k-sign": _k_sign,
    "parallel-auxiliary": _parallel,
    "step-feasibility": _step_feasibility,
    "map-recovery": _map_recovery,
    "oracle-convergence": _oracle,
}

SUITES = tuple(RANDOM_SUITES) + ("stall-exactness", "trace-equivalence")


def mutated_ff_handler(state, poly, trace) -> Optional[StallEvent]:
    """Fast-forward handler that deliberately skips one cycle too many.

    Auxiliaries driven below zero are clamped instead of rejected, so the
    error only shows up in the iterates.
    """
    try:
        info = compute_stall_length(state, poly)
    except InconsistentStallError:
        return None
    if not jump_is_safe(state, info, trace.eps_stall):
        return None
    info = dataclasses.replace(info, skip_cycles=info.n_stall + 1)
    r = stall_residuals(state, poly)
    live = state.k > 0.0
    state.k[live] = np.maximum(0.0, state.k[live] + info.skip_cycles * r[live])
    return StallEvent(state.m, info.n_stall, info.i_stall, info.skip_cycles, True, info)


def _stall_suites(seed: int, mutate: bool) -> dict:
    poly, x0 = stall_inducing_instance(seed)
    tol = TRACE_TOL_PLANAR if seed == 0 else TRACE_TOL_RANDOM
    out = {}
    if mutate:
        plain = run(poly, x0)
        try:
            ff = _iterate(poly, x0, RunOptions(mode="dykstra_ff"), mode="dykstra_ff",
                          use_aux=True, on_stall=mutated_ff_handler)
        except DykstraError as exc:
            out["trace-equivalence"] = f"mutated run aborted: {exc}"
            return out
        dev, _ = excised_deviation(plain, ff)
        out["trace-equivalence"] = None if dev <= tol else f"excised deviation {dev:.3e}"
        return out
    cmp = compare_runs(poly, x0)
    bad = [c for c in cmp.checks if not c.agrees]
    if not cmp.checks:
        out["stall-exactness"] = "no stall detected on a stall-inducing instance"
    else:
        out["stall-exactness"] = None if not bad else f"formula/brute mismatch {bad}"
    if cmp.matched == 0:
        out["trace-equivalence"] = "no overlapping iterates"
    else:
        out["trace-equivalence"] = (None if cmp.deviation <= tol
                                    else f"excised deviation {cmp.deviation:.3e}")
    return out


def run_suites(seeds: Iterable[int], *, mutate: bool = False,
               progress: Optional[Callable[[int], None]] = None) -> VerifyReport:
    """Run every suite on every seed.

    With ``mutate`` only the trace-equivalence suite runs, against a
    fast-forward that skips ``n_stall + 1`` cycles; it is expected to fail.
    """
    seeds = tuple(seeds)
    names = ("trace-equivalence",) if mutate else SUITES
    passed = {name: 0 for name in names}
    failures = []

    def record(name, seed, detail):
        if detail is None:
            passed[name] += 1
        else:
            failures.append(Failure(name, seed, detail))

    for seed in seeds:
        if not mutate:
            poly, x0 = random_case(seed)
            try:
                plain = run(poly, x0)
            except DykstraError as exc:
                for name in RANDOM_SUITES:
                    record(name, seed, f"run failed: {exc}")
            else:
                for name, fn in RANDOM_SUITES.items():
                    try:
                        record(name, seed, fn(seed, plain, poly, x0))
                    except DykstraError as exc:
                        record(name, seed, f"{type(exc).__name__}: {exc}")
        try:
            results = _stall_suites(seed, mutate)
        except (DykstraError, RuntimeError) as exc:
            results = {name: f"{type(exc).__name__}: {exc}"
                       for name in ("stall-exactness", "trace-equivalence") if name in names}
        for name, detail in results.items():
            record(name, seed, detail)
        if progress is not None:
            progress(seed)
    return VerifyReport(seeds, passed, failures)
