"""JSON problem files.

A problem file looks like::

    {
      "dim": 2,
      "halfspaces": [{"a": [1.0, 0.0], "b": 1.0}, ...],
      "equalities": [{"a": [1.0, 2.0], "b": 2.0}],
      "x0": [-4.0, 1.4],
      "x_star": [0.0, 1.0],
      "options": {"max_iter": 10000, "mode": "dykstra"}
    }

``equalities``, ``x_star`` and ``options`` are optional. Constraints are
stored exactly as given; normalization happens when the polyhedron is built.
Equalities become ``<=``/``>=`` pairs appended after the inequalities.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..core import RunOptions
from ..geometry import Polyhedron, polyhedron_from_constraints

__all__ = ["Problem", "ProblemFormatError", "load_problem", "dump_problem", "save_problem"]

_OPTION_KEYS = {"max_iter", "eps_stall", "tol_feas", "tol_conv", "mode", "early_stop"}


class ProblemFormatError(ValueError):
    pass


@dataclass
class Problem:
    dim: int
    halfspaces: list
    x0: list
    equalities: list = field(default_factory=list)
    x_star: Optional[list] = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ProblemFormatError("dim must be a positive integer")
        if not self.halfspaces and not self.equalities:
            raise ProblemFormatError("at least one constraint is required")
        for kind in ("halfspaces", "equalities"):
            for j, (a, _) in enumerate(getattr(self, kind)):
                if len(a) != self.dim:
                    raise ProblemFormatError(f"{kind}[{j}] has {len(a)} coefficients, dim is {self.dim}")
        if len(self.x0) != self.dim:
            raise ProblemFormatError("x0 length does not match dim")
        if self.x_star is not None and len(self.x_star) != self.dim:
            raise ProblemFormatError("x_star length does not match dim")
        unknown = set(self.options) - _OPTION_KEYS
        if unknown:
            raise ProblemFormatError(f"unknown options: {sorted(unknown)}")

    @classmethod
    def from_polyhedron(cls, poly: Polyhedron, x0, x_star=None, options=None) -> "Problem":
        return cls(dim=poly.dim,
                   halfspaces=[([float(v) for v in h.normal], float(h.offset)) for h in poly],
                   x0=[float(v) for v in x0],
                   x_star=None if x_star is None else [float(v) for v in x_star],
                   options=dict(options or {}))

    def polyhedron(self) -> Polyhedron:
        return polyhedron_from_constraints(self.halfspaces, self.equalities)

    @property
    def x0_array(self) -> np.ndarray:
        return np.array(self.x0, dtype=float)

    @property
    def x_star_array(self) -> Optional[np.ndarray]:
        return None if self.x_star is None else np.array(self.x_star, dtype=float)

    def run_options(self, **overrides) -> RunOptions:
        kw = dict(self.options)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return RunOptions(**kw)

    def to_json(self) -> dict:
        out = {"dim": self.dim,
               "halfspaces": [{"a": list(a), "b": b} for a, b in self.halfspaces]}
        if self.equalities:
            out["equalities"] = [{"a": list(a), "b": b} for a, b in self.equalities]
        out["x0"] = list(self.x0)
        if self.x_star is not None:
            out["x_star"] = list(self.x_star)
        if self.options:
            out["options"] = dict(self.options)
        return out


def _constraint_list(raw, kind):
    if not isinstance(raw, list):
        raise ProblemFormatError(f"{kind} must be a list")
    out = []
    for j, item in enumerate(raw):
        try:
            a = [float(v) for v in item["a"]]
            b = float(item["b"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProblemFormatError(f"{kind}[{j}] is malformed: {exc}") from None
        out.append((a, b))
    return out


def parse_problem(data: dict) -> Problem:
    if not isinstance(data, dict):
        raise ProblemFormatError("problem file must hold a JSON object")
    try:
        dim = data["dim"]
        x0 = [float(v) for v in data["x0"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFormatError(f"missing or malformed field: {exc}") from None
    x_star = data.get("x_star")
    if x_star is not None:
        x_star = [float(v) for v in x_star]
    return Problem(dim=dim,
                   halfspaces=_constraint_list(data.get("halfspaces", []), "halfspaces"),
                   equalities=_constraint_list(data.get("equalities", []), "equalities"),
                   x0=x0, x_star=x_star, options=dict(data.get("options", {})))


def load_problem(path) -> Problem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path}: invalid JSON ({exc})") from None
    return parse_problem(data)


def dump_problem(problem: Problem) -> str:
    # json writes floats with repr, which round-trips exactly
    return json.dumps(problem.to_json(), indent=2) + "\n"


def save_problem(problem: Problem, path) -> None:
    Path(path).write_text(dump_problem(problem), newline="\n")
