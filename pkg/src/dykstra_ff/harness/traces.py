"""CSV export of run traces.

Three layouts are produced:

* per-iteration trace: one row per executed step;
* per-cycle summary ``iteration,error,halfspace``: 1-based cycle number, squared
  error after the cycle's last step, and whether the watched half-space
  took the projected branch in that cycle (1) or not (0);
* planar iterates ``x,y``: the starting point followed by every iterate.

Numbers are written with ``repr`` so files are byte-stable and lossless.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional

import numpy as np

from ..core import PROJECTED, Trace, error_metric

__all__ = [
    "SUMMARY_HEADER",
    "ITERATES_HEADER",
    "default_watch",
    "cycle_summary",
    "summary_csv",
    "trace_csv",
    "iterates_csv",
    "write_text",
]

SUMMARY_HEADER = ("iteration", "error", "halfspace")
ITERATES_HEADER = ("x", "y")


def _num(v) -> str:
    return repr(float(v))


def _render(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def write_text(text: str, path) -> None:
    Path(path).write_text(text, newline="\n")


def default_watch(trace: Trace) -> int:
    """Half-space that ended the first stall, or 0 if the run never stalled."""
    return trace.stall_events[0].i_stall if trace.stall_events else 0


def cycle_summary(trace: Trace, x_star, watch: Optional[int] = None) -> list:
    """Rows ``(cycle, error, active)`` for every completed cycle, numbered from 1."""
    n = trace.n
    watch = default_watch(trace) if watch is None else int(watch)
    if not 0 <= watch < n:
        raise ValueError(f"watched half-space {watch} is out of range 0..{n - 1}")
    x_star = np.asarray(x_star, dtype=float)
    rows = []
    for c in range(trace.cycles_completed):
        recs = trace.records[c * n:(c + 1) * n]
        err = error_metric(recs[-1].x_after, x_star)
        active = int(recs[watch].branch == PROJECTED)
        rows.append((c + 1, err, active))
    return rows


def summary_csv(trace: Trace, x_star, watch: Optional[int] = None) -> str:
    rows = [SUMMARY_HEADER]
    rows += [(c, _num(e), a) for c, e, a in cycle_summary(trace, x_star, watch)]
    return _render(rows)


def trace_csv(trace: Trace) -> str:
    """One row per step; ``x_0..x_{p-1}`` hold the iterate after the step."""
    header = ["m", "cycle", "halfspace", "branch", "k_after", "residual", "stalled",
              "ff_n_stall", "ff_i_stall", "error_sq"]
    header += [f"x_{j}" for j in range(trace.dim)]
    rows = [header]
    for r in trace.records:
        ff = r.ff_event or ("", "")
        rows.append([r.m, r.cycle, r.halfspace, r.branch, _num(r.k_after), _num(r.residual),
                     int(r.stalled), ff[0], ff[1],
                     "" if r.error_sq is None else _num(r.error_sq)]
                    + [_num(v) for v in r.x_after])
    return _render(rows)


def iterates_csv(trace: Trace) -> str:
    if trace.dim != 2:
        raise ValueError("the x,y iterate layout needs a planar problem")
    rows = [ITERATES_HEADER, tuple(_num(v) for v in trace.x0)]
    rows += [tuple(_num(v) for v in r.x_after) for r in trace.records]
    return _render(rows)
