import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dykstra_ff.exceptions import DegenerateHalfSpaceError, DimensionMismatchError
from dykstra_ff.geometry import (Activity, HalfSpace, Polyhedron, classify_activity,
                                 equality_to_halfspaces, make_halfspace,
                                 polyhedron_from_constraints, project_halfspace, violation)

S5 = math.sqrt(5.0)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)
vec2 = arrays(np.float64, 2, elements=finite)
vec3 = arrays(np.float64, 3, elements=finite)


class TestMakeHalfspace:
    def test_unit_normal_kept(self):
        h = make_halfspace((1, 0), 1)
        assert np.array_equal(h.normal, [1.0, 0.0]) and h.offset == 1.0

    def test_scaled_normal(self):
        h = make_halfspace((2, 0), 2)
        assert np.array_equal(h.normal, [1.0, 0.0]) and h.offset == 1.0

    def test_line_normal(self):
        h = make_halfspace((1, 2), 2)
        np.testing.assert_allclose(h.normal, [1 / S5, 2 / S5], rtol=0, atol=1e-15)
        assert h.offset == pytest.approx(2 / S5, abs=1e-15)

    @pytest.mark.parametrize("a", [(0, 0), (0.0, -0.0), (np.nan, 1), (np.inf, 0)])
    def test_degenerate(self, a):
        with pytest.raises(DegenerateHalfSpaceError):
            make_halfspace(a, 1.0)

    def test_nonfinite_offset(self):
        with pytest.raises(DegenerateHalfSpaceError):
            make_halfspace((1, 0), np.inf)

    def test_normal_is_read_only(self):
        h = make_halfspace((3, 4), 1)
        with pytest.raises(ValueError):
            h.normal[0] = 0.0

    def test_negated(self):
        h = make_halfspace((1, 2), 2).negated()
        np.testing.assert_allclose(h.normal, [-1 / S5, -2 / S5], atol=1e-15)
        assert h.offset == pytest.approx(-2 / S5)


class TestViolation:
    def test_left_side_of_box(self):
        assert violation((-4, 1.4), make_halfspace((-1, 0), 1)) == 3.0

    def test_on_hyperplane(self):
        assert violation((1, 5), make_halfspace((1, 0), 1)) == 0.0

    def test_origin(self):
        assert violation((0, 0), make_halfspace((0, 1), 1)) == -1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            violation((0, 0, 0), make_halfspace((0, 1), 1))


class TestProjectHalfspace:
    def test_left_side_of_box(self):
        np.testing.assert_array_equal(project_halfspace((-4, 1.4), make_halfspace((-1, 0), 1)), [-1, 1.4])

    def test_feasible_unchanged(self):
        x = np.array([0.5, 0.5])
        y = project_halfspace(x, make_halfspace((0, 1), 1))
        np.testing.assert_array_equal(y, x)
        assert y is not x

    def test_line_upper_side(self):
        lo, hi = equality_to_halfspaces((1, 2), 2)
        assert violation((-1, 1), lo) == pytest.approx(-1 / S5)
        np.testing.assert_allclose(project_halfspace((-1, 1), hi), [-0.8, 1.4], atol=1e-15)

    @given(vec3, vec3, finite)
    def test_idempotent_feasible_and_minimal(self, x, a, b):
        if np.linalg.norm(a) < 1e-6:
            return
        h = make_halfspace(a, b)
        y = project_halfspace(x, h)
        scale = max(1.0, float(np.linalg.norm(x)), abs(h.offset))
        assert np.max(np.abs(project_halfspace(y, h) - y)) <= 1e-15 * scale
        assert violation(y, h) <= 1e-12 * scale
        r = violation(x, h)
        if r > 0:
            assert np.linalg.norm(x - y) == pytest.approx(r, rel=1e-12, abs=1e-12 * scale)

    @given(vec2, vec2, finite, st.floats(min_value=1e-3, max_value=1e3))
    def test_normalization_invariance(self, x, a, b, c):
        if np.linalg.norm(a) < 1e-6:
            return
        v1 = violation(x, make_halfspace(a, b))
        v2 = violation(x, make_halfspace(c * a, c * b))
        assert v1 == pytest.approx(v2, abs=1e-12 * max(1.0, np.linalg.norm(x), abs(v1)))


class TestPolyhedron:
    def test_matrices(self, canonical):
        poly, _ = canonical
        assert poly.n == 6 and poly.dim == 2
        np.testing.assert_allclose(np.linalg.norm(poly.A, axis=1), 1.0, atol=1e-15)
        assert not poly.A.flags.writeable

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionMismatchError):
            Polyhedron((make_halfspace((1, 0), 1), make_halfspace((1, 0, 0), 1)))

    def test_empty(self):
        with pytest.raises(ValueError):
            Polyhedron(())

    def test_from_arrays_normalizes(self):
        poly = Polyhedron.from_arrays([[2, 0], [0, 3]], [2, 3])
        np.testing.assert_array_equal(poly.A, np.eye(2))
        np.testing.assert_array_equal(poly.b, [1, 1])

    def test_from_constraints_order(self):
        poly = polyhedron_from_constraints([((1, 0), 1)], [((0, 2), 4)])
        np.testing.assert_array_equal(poly.A, [[1, 0], [0, 1], [0, -1]])
        np.testing.assert_array_equal(poly.b, [1, 2, -2])

    def test_residuals_and_contains(self, canonical):
        poly, x0 = canonical
        assert not poly.contains(x0)
        assert poly.contains((0, 1), tol=1e-15)
        assert poly.max_violation((0, 1)) <= 1e-15

    def test_transformed_preserves_membership(self):
        poly = Polyhedron.from_arrays(np.vstack([np.eye(2), -np.eye(2)]), np.ones(4))
        th = 0.7
        Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        shift, scale = np.array([3.0, -2.0]), 2.5
        moved = poly.transformed(Q, shift, scale)
        for p in ([0.3, -0.9], [1.2, 0.0], [-0.99, 0.99]):
            img = scale * Q @ np.array(p) + shift
            np.testing.assert_allclose(moved.residuals(img), scale * poly.residuals(p), atol=1e-12)

    def test_halfspace_equality_and_hash(self):
        h1, h2 = make_halfspace((1, 1), 1), make_halfspace((2, 2), 2)
        assert h1 == h2 and hash(h1) == hash(h2)


class TestEquality:
    def test_line(self):
        lo, hi = equality_to_halfspaces((1, 2), 2)
        np.testing.assert_allclose(lo.normal, [1 / S5, 2 / S5], atol=1e-15)
        assert hi == lo.negated()

    def test_axis(self):
        lo, hi = equality_to_halfspaces((1, 0), 0)
        assert lo == HalfSpace((1.0, 0.0), 0.0)
        assert hi == HalfSpace((-1.0, -0.0), -0.0)

    def test_horizontal(self):
        lo, hi = equality_to_halfspaces((0, 1), 3)
        assert (lo.offset, hi.offset) == (3.0, -3.0)
        np.testing.assert_array_equal(hi.normal, [0, -1])

    def test_zero_normal(self):
        with pytest.raises(DegenerateHalfSpaceError):
            equality_to_halfspaces((0, 0), 1)


class TestActivity:
    def test_at_optimum(self, canonical):
        poly, _ = canonical
        rep = classify_activity((0, 1), poly)
        assert rep.statuses[2] is Activity.BOUNDARY      # y <= 1
        assert rep.statuses[1] is Activity.INTERIOR      # -x <= 1
        assert rep.statuses[4] is Activity.BOUNDARY and rep.statuses[5] is Activity.BOUNDARY
        assert rep.active == (2, 4, 5)

    def test_strict_interior(self):
        poly = Polyhedron.from_arrays(np.vstack([np.eye(2), -np.eye(2)]), np.ones(4))
        rep = classify_activity((0.1, -0.2), poly)
        assert rep.count(Activity.INTERIOR) == 4 and rep.active == ()

    def test_three_exterior_at_start(self, canonical):
        poly, x0 = canonical
        rep = classify_activity(x0, poly)
        assert rep.count(Activity.EXTERIOR) == 3
        assert rep.active == (1, 2, 5)

    def test_tolerance_must_be_positive(self, canonical):
        with pytest.raises(ValueError):
            classify_activity((0, 0), canonical[0], tol=0.0)
