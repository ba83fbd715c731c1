import numpy as np
import pytest

from dykstra_ff import (Polyhedron, RunOptions, compute_stall_length, detect_stall,
                        fast_forward, initial_state, canonical_instance, run, run_ff)
from dykstra_ff.core import INACTIVE, PROJECTED, dykstra_step
from dykstra_ff.exceptions import FastForwardConsistencyError, InconsistentStallError
from dykstra_ff.geometry import equality_to_halfspaces, make_halfspace
from dykstra_ff.harness.experiments import compare_runs, excised_deviation
from dykstra_ff.oracle import brute_force_stall_count, first_stall_state
from dykstra_ff.stall import jump_is_safe, run_observed, stall_residuals

from conftest import scaled_canonical, tied_instance


@pytest.fixture
def stalled(canonical):
    poly, x0 = canonical
    return poly, first_stall_state(poly, x0)


class TestDetect:
    def test_canonical_instance_in_second_cycle(self, stalled):
        poly, s = stalled
        assert s.m == 13 and (s.m - 1) // poly.n == 2
        assert detect_stall(s, 1e-10 * (1 + np.hypot(4, 1.4)))

    def test_window_not_full(self, canonical):
        poly, x0 = canonical
        s = initial_state(poly, x0)
        for _ in range(2 * poly.n - 1):
            assert not detect_stall(s, 1e-3)
            dykstra_step(s, poly)

    def test_contracting_affine_instance_never_stalls(self):
        pair = equality_to_halfspaces((1.0, 0.3), 0.5) + equality_to_halfspaces((0.2, 1.0), -0.4)
        poly = Polyhedron(pair)
        s = initial_state(poly, [5.0, 7.0])
        eps = 1e-10 * (1 + np.hypot(5, 7))
        x_star = np.linalg.solve([[1.0, 0.3], [0.2, 1.0]], [0.5, -0.4])
        while np.linalg.norm(s.x - x_star) > 1e-6:
            dykstra_step(s, poly)
            assert not detect_stall(s, eps)

    def test_eps_must_be_positive(self, stalled):
        with pytest.raises(ValueError):
            detect_stall(stalled[1], 0.0)


class TestStallLength:
    def test_canonical_instance(self, stalled):
        poly, s = stalled
        info = compute_stall_length(s, poly)
        assert info.candidates == (1,)
        assert info.n_stall == 14 and info.i_stall == 1
        assert info.residuals[1] == pytest.approx(-0.2)
        assert brute_force_stall_count(s, poly) == 14

    @pytest.mark.parametrize("k, expected", [(3.0, 3), (2.5, 3), (1.0, 1), (0.5, 1), (7.25, 8)])
    def test_crafted_ratio(self, k, expected):
        poly, x0 = scaled_canonical(5.0)
        s = first_stall_state(poly, x0)
        assert stall_residuals(s, poly)[1] == pytest.approx(-1.0, abs=1e-14)
        s.k[1] = k
        assert compute_stall_length(s, poly).n_stall == expected
        assert brute_force_stall_count(s, poly) == expected

    def test_exact_cancel_skips_full_length(self):
        poly, x0 = scaled_canonical(5.0)
        s = first_stall_state(poly, x0)
        s.k[1] = 1.0
        info = compute_stall_length(s, poly)
        assert (info.n_stall, info.skip_cycles) == (1, 1)
        fast_forward(s, info, poly)
        assert s.k[1] == 0.0
        while s.m % poly.n != 1:
            dykstra_step(s, poly)
        assert dykstra_step(s, poly).branch == INACTIVE

    def test_fractional_ratio_skips_one_cycle_less(self, stalled):
        poly, s = stalled
        s.k[1] = 2.7
        info = compute_stall_length(s, poly)
        assert (info.n_stall, info.skip_cycles) == (14, 13)

    def test_no_draining_halfspace(self, stalled):
        poly, s = stalled
        s.k[:] = 0.0
        with pytest.raises(InconsistentStallError):
            compute_stall_length(s, poly)

    @pytest.mark.parametrize("c", [1e-3, 0.1, 10.0, 1e4])
    def test_scale_invariance(self, c):
        poly, x0 = scaled_canonical(c)
        s = first_stall_state(poly, x0)
        assert compute_stall_length(s, poly).n_stall == 14
        assert brute_force_stall_count(s, poly) == 14


class TestTieBreak:
    def test_smaller_index_wins(self):
        poly, x0 = tied_instance()
        s = first_stall_state(poly, x0)
        info = compute_stall_length(s, poly)
        assert info.per_candidate == {1: 14, 7: 14}
        # the jump starts at slot 7, so visit order alone would pick 7
        assert s.m % poly.n == 7
        assert info.i_stall == 1
        assert brute_force_stall_count(s, poly) == 14

    def test_trace_equivalence(self):
        cmp = compare_runs(*tied_instance())
        assert cmp.deviation <= 1e-9 and cmp.matched > 100
        assert [e.i_stall for e in cmp.ff.ff_events] == [1]
        assert cmp.formula_agrees


class TestFastForward:
    def test_iterate_untouched(self, stalled):
        poly, s = stalled
        x, m, w = s.x.copy(), s.m, list(s.window)
        info = compute_stall_length(s, poly)
        fast_forward(s, info, poly)
        np.testing.assert_array_equal(s.x, x)
        assert s.m == m and all(np.array_equal(a, b) for a, b in zip(s.window, w))
        assert abs(s.k[1]) <= 1e-12
        assert np.all(s.k >= 0.0)

    def test_matches_plain_state_after_stall(self, canonical):
        poly, x0 = canonical
        s = first_stall_state(poly, x0)
        info = compute_stall_length(s, poly)
        plain = s.copy()
        for _ in range(info.skip_cycles * poly.n):
            dykstra_step(plain, poly)
        fast_forward(s, info, poly)
        np.testing.assert_allclose(s.k, plain.k, rtol=0, atol=1e-12)
        np.testing.assert_allclose(s.x, plain.x, rtol=0, atol=1e-12)

    def test_overshoot_rejected(self, stalled):
        poly, s = stalled
        info = compute_stall_length(s, poly)
        from dataclasses import replace
        with pytest.raises(FastForwardConsistencyError):
            fast_forward(s, replace(info, skip_cycles=info.n_stall + 1), poly)

    def test_stale_info_rejected(self, stalled):
        poly, s = stalled
        info = compute_stall_length(s, poly)
        dykstra_step(s, poly)
        with pytest.raises(FastForwardConsistencyError):
            fast_forward(s, info, poly)

    def test_jump_safety(self, stalled):
        poly, s = stalled
        info = compute_stall_length(s, poly)
        assert jump_is_safe(s, info, 1e-10)
        s.window[-1] = s.window[-1] + 1e-9
        assert not jump_is_safe(s, info, 1e-10)


class TestRunFF:
    def test_canonical_instance(self, canonical):
        ff = run_ff(*canonical)
        plain = run(*canonical)
        assert [(e.n_stall, e.i_stall, e.skip_cycles) for e in ff.ff_events] == [(14, 1, 14)]
        assert plain.iterations - ff.iterations == 14 * 6
        assert ff.records[12].ff_event == (14, 1)
        dev, matched = excised_deviation(plain, ff)
        assert dev <= 1e-9 and matched == ff.iterations

    def test_state_after_jump_matches_cycle_17(self, canonical):
        poly, x0 = canonical
        plain = run(poly, x0).cycle_end_iterates()
        ff = run_ff(poly, x0).cycle_end_iterates()
        # 1-based: FF cycle 3 is plain cycle 17
        np.testing.assert_allclose(ff[2], plain[16], atol=1e-12)
        np.testing.assert_allclose(ff[2:], plain[16:16 + len(ff) - 2], atol=1e-9)

    def test_no_stall_is_bitwise_identical(self):
        poly = Polyhedron.from_arrays(np.eye(3), np.ones(3))
        x0 = np.array([2.0, 3.0, -1.0])
        a, b = run(poly, x0), run_ff(poly, x0)
        assert not b.stall_events
        assert a.iterations == b.iterations
        assert all(np.array_equal(r.x_after, q.x_after) for r, q in zip(a.records, b.records))

    def test_multi_stall_instance(self):
        from dykstra_ff.oracle import multi_stall_instance
        poly, x0 = multi_stall_instance(1)
        cmp = compare_runs(poly, x0)
        assert len(cmp.ff.ff_events) >= 2
        assert cmp.checks and cmp.formula_agrees
        assert cmp.deviation <= 1e-9

    def test_observed_run_records_but_does_not_jump(self, canonical):
        tr = run_observed(*canonical)
        assert [e.n_stall for e in tr.stall_events] == [14]
        assert not tr.ff_events and tr.iterations == run(*canonical).iterations

    def test_final_iterates_agree(self, canonical):
        poly, x0 = canonical
        ff = run_ff(poly, x0, RunOptions(max_iter=600, early_stop=False))
        plain = run(poly, x0, RunOptions(max_iter=600 + 84, early_stop=False))
        np.testing.assert_allclose(ff.x, plain.x, atol=1e-9)
