"""Half-spaces, polyhedra and the single-set operations built on them.

Every half-space is stored in normalized form ``{x : a @ x <= b}`` with
``||a||_2 == 1``. The polyhedron keeps the half-spaces in a fixed order;
that order is the cyclic schedule followed by the projection solvers.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .exceptions import DegenerateHalfSpaceError, DimensionMismatchError

__all__ = [
    "HalfSpace",
    "Polyhedron",
    "Activity",
    "ActivityReport",
    "DEFAULT_ACTIVITY_TOL",
    "make_halfspace",
    "violation",
    "project_halfspace",
    "classify_activity",
    "equality_to_halfspaces",
    "polyhedron_from_constraints",
]

DEFAULT_ACTIVITY_TOL = 1e-9


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HalfSpace:
    """The set ``{x : normal @ x <= offset}`` with a unit-length normal.

    Use :func:`make_halfspace` to build one from arbitrary data; the
    constructor assumes the normal is already normalized.
    """

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", _frozen(self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def negated(self) -> "HalfSpace":
        """The opposite closed half-space ``{x : -normal @ x <= -offset}``."""
        return HalfSpace(-self.normal, -self.offset)

    def __eq__(self, other):
        if not isinstance(other, HalfSpace):
            return NotImplemented
        return self.offset == other.offset and np.array_equal(self.normal, other.normal)

    def __hash__(self):
        return hash((self.normal.tobytes(), self.offset))


@dataclass(frozen=True)
class Polyhedron:
    """Ordered intersection of half-spaces sharing one dimension.

    Index ``i`` of :attr:`halfspaces` is visited at every iteration ``m``
    with ``m % n == i``.
    """

    halfspaces: tuple
    dim: int = field(init=False)
    A: np.ndarray = field(init=False, repr=False, compare=False)
    b: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if not hs:
            raise ValueError("a polyhedron needs at least one half-space")
        dim = hs[0].dim
        for i, h in enumerate(hs):
            if h.dim != dim:
                raise DimensionMismatchError(
                    f"half-space {i} has dimension {h.dim}, expected {dim}")
        object.__setattr__(self, "halfspaces", hs)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "A", _frozen([h.normal for h in hs]))
        object.__setattr__(self, "b", _frozen([h.offset for h in hs]))

    @classmethod
    def from_arrays(cls, A, b) -> "Polyhedron":
        """Build ``{x : A x <= b}``, normalizing every row."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise DimensionMismatchError("A and b disagree on the number of rows")
        return cls(tuple(make_halfspace(a, beta) for a, beta in zip(A, b)))

    @property
    def n(self) -> int:
        return len(self.halfspaces)

    def __len__(self):
        return len(self.halfspaces)

    def __getitem__(self, i) -> HalfSpace:
        return self.halfspaces[i]

    def __iter__(self):
        return iter(self.halfspaces)

    def residuals(self, x) -> np.ndarray:
        """Signed residuals ``A x - b`` for every member."""
        x = _check_point(x, self.dim)
        return self.A @ x - self.b

    def max_violation(self, x) -> float:
        return max(0.0, float(np.max(self.residuals(x))))

    def contains(self, x, tol: float = 0.0) -> bool:
        return bool(np.all(self.residuals(x) <= tol))

    def transformed(self, Q=None, shift=None, scale: float = 1.0) -> "Polyhedron":
        """Image of the polyhedron under ``x -> scale * Q x + shift``.

        ``Q`` must be orthogonal, so normals stay unit length.
        """
        Q = np.eye(self.dim) if Q is None else np.asarray(Q, dtype=float)
        shift = np.zeros(self.dim) if shift is None else np.asarray(shift, dtype=float)
        out = []
        for h in self.halfspaces:
            a = Q @ h.normal
            out.append(make_halfspace(a, scale * h.offset + a @ shift))
        return Polyhedron(tuple(out))


class Activity(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class ActivityReport:
    statuses: tuple
    tol: float

    @property
    def active(self) -> tuple:
        """Indices on the boundary or outside (the active partition)."""
        return tuple(i for i, s in enumerate(self.statuses) if s is not Activity.INTERIOR)

    @property
    def inactive(self) -> tuple:
        return tuple(i for i, s in enumerate(self.statuses) if s is Activity.INTERIOR)

    def count(self, status: Activity) -> int:
        return sum(1 for s in self.statuses if s is status)


def _check_point(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise DimensionMismatchError(f"expected a vector of length {dim}, got shape {x.shape}")
    return x


def make_halfspace(raw_normal, raw_offset: float) -> HalfSpace:
    """Normalize ``raw_normal @ x <= raw_offset`` to unit-normal form.

    Parameters
    ----------
    raw_normal : array_like
        Finite, nonzero normal vector.
    raw_offset : float
        Right-hand side.

    Raises
    ------
    DegenerateHalfSpaceError
        If the normal has zero norm or is not finite.
    """
    a = np.asarray(raw_normal, dtype=float).ravel()
    if a.size == 0 or not np.all(np.isfinite(a)) or not np.isfinite(raw_offset):
        raise DegenerateHalfSpaceError("half-space data must be finite and non-empty")
    norm = np.linalg.norm(a)
    if norm == 0.0:
        raise DegenerateHalfSpaceError("zero normal does not define a half-space")
    if abs(norm - 1.0) <= 4 * np.finfo(float).eps:
        # already unit length; dividing again would perturb the last bits
        return HalfSpace(a, float(raw_offset))
    return HalfSpace(a / norm, float(raw_offset) / norm)


def violation(x, h: HalfSpace) -> float:
    """Signed residual ``normal @ x - offset``; positive outside ``h``."""
    x = _check_point(x, h.dim)
    return float(h.normal @ x) - h.offset


def project_halfspace(x, h: HalfSpace) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``h``.

    Feasible points are returned unchanged (as a copy).
    """
    x = _check_point(x, h.dim)
    r = violation(x, h)
    if r <= 0.0:
        return x.copy()
    return x - r * h.normal


def classify_activity(x, poly: Polyhedron, tol: float = DEFAULT_ACTIVITY_TOL) -> ActivityReport:
    """Label each half-space of ``poly`` as interior, boundary or exterior at ``x``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    res = poly.residuals(x)
    statuses = []
    for r in res:
        if r < -tol:
            statuses.append(Activity.INTERIOR)
        elif r > tol:
            statuses.append(Activity.EXTERIOR)
        else:
            statuses.append(Activity.BOUNDARY)
    return ActivityReport(tuple(statuses), float(tol))


def equality_to_halfspaces(raw_normal, raw_offset: float) -> tuple:
    """Split the hyperplane ``raw_normal @ x == raw_offset`` into two half-spaces.

    Returns the ``<=`` side first, then its negation.
    """
    h = make_halfspace(raw_normal, raw_offset)
    return h, h.negated()


def polyhedron_from_constraints(inequalities: Iterable = (), equalities: Iterable = ()) -> Polyhedron:
    """Assemble a polyhedron from ``(a, b)`` pairs.

    Inequalities keep their order and come first; each equality is appended
    as its ``<=``/``>=`` pair.
    """
    hs = [make_halfspace(a, b) for a, b in inequalities]
    for a, b in equalities:
        hs.extend(equality_to_halfspaces(a, b))
    return Polyhedron(tuple(hs))
