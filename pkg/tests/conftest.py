import numpy as np
import pytest
from hypothesis import settings

from dykstra_ff import Polyhedron, canonical_instance
from dykstra_ff.geometry import make_halfspace

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def canonical():
    return canonical_instance()


def box(half=1.0, dim=2):
    """Axis-aligned cube ``[-half, half]^dim`` as ``(A, b)``."""
    eye = np.eye(dim)
    A = np.vstack([eye, -eye])
    return A, np.full(2 * dim, half)


def scaled_canonical(c):
    """Canonical geometry scaled by ``c`` about the origin."""
    poly, x0 = canonical_instance()
    return poly.transformed(scale=c), c * x0


def tied_instance():
    """Two copies of the canonical problem in orthogonal coordinate planes.

    The first copy starts 0.2 further out, which delays its stall by one
    cycle and makes both left box sides run out on the same cycle.
    """
    poly, x0 = canonical_instance()
    first = [make_halfspace(np.r_[h.normal, 0.0, 0.0], h.offset) for h in poly]
    second = [make_halfspace(np.r_[0.0, 0.0, h.normal], h.offset) for h in poly]
    return Polyhedron(tuple(first + second)), np.r_[x0[0] - 0.2, x0[1], x0]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
