"""
Tests for the edge-pushing Hessian, its accumulator and the structural pattern.
"""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from unittest.mock import patch

from bench import make_family
from conftest import WORKED_HESSIAN, WORKED_POINT
from core.config import reset_config
from core.edge_pushing import (
    SparseHessian,
    SparseSymAccumulator,
    edge_pushing_hessian,
    structural_pattern,
)
from core.errors import InvariantViolation, NumericError, StateError
from core.oracles import relative_discrepancy
from core.random_tapes import random_tape
from core.reverse_gradient import reverse_gradient
from core.tape import forward_sweep, record, sin

seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestAccumulator:
    def test_edges_are_mirrored_and_loops_stored_once(self):
        acc = SparseSymAccumulator(4)
        acc.add(2, 1, 1.5)
        acc.add(1, 2, 0.5)
        acc.add(3, 3, 2.0)
        assert acc.neighbors(1) == {2: 2.0}
        assert acc.neighbors(2) == {1: 2.0}
        assert acc.neighbors(3) == {3: 2.0}
        assert acc.live_edges == 2
        assert list(acc.edges()) == [(2, 1, 2.0), (3, 3, 2.0)]
        acc.check_symmetry()

    def test_detach_frees_both_sides(self):
        acc = SparseSymAccumulator(4)
        acc.add(3, 0, 1.0)
        acc.add(3, 3, 4.0)
        acc.add(2, 1, 1.0)
        detached = dict(acc.detach(3))
        assert detached == {0: 1.0, 3: 4.0}
        assert acc.neighbors(0) == {}
        assert acc.live_edges == 1
        assert acc.allocated_edges == 3

    def test_block_support_violation(self):
        acc = SparseSymAccumulator(4)
        acc.add(2, 0, 1.0)
        acc.check_block_support(3)
        with pytest.raises(InvariantViolation):
            acc.check_block_support(2)

    def test_non_finite_weight(self):
        acc = SparseSymAccumulator(2)
        with pytest.raises(NumericError) as info:
            acc.add(1, 0, float("inf"), node_id=7)
        assert info.value.node_id == 7


class TestEdgePushingHessian:
    def test_worked_example(self, worked_tape):
        hessian, _ = edge_pushing_hessian(forward_sweep(worked_tape, WORKED_POINT))
        got = hessian.as_dict()
        assert got.get((0, 0), 0.0) == 0.0
        got.pop((0, 0), None)
        assert set(got) == set(WORKED_HESSIAN)
        for key, value in WORKED_HESSIAN.items():
            assert abs(got[key] - value) <= 1e-12

    def test_product_sum(self, product_sum_tape):
        hessian, _ = edge_pushing_hessian(forward_sweep(product_sum_tape, [1.0, 2.0]))
        np.testing.assert_array_equal(hessian.to_dense(), [[4.0, 6.0], [6.0, 2.0]])
        stats = hessian.stats
        assert stats.pushes_case_i == 1
        assert stats.pushes_case_iii == 2
        assert stats.pushes_case_ii == 0
        assert stats.creations == 2

    def test_linear_function_allocates_nothing(self):
        tape = record(lambda x: 3 * x[0] + x[1] - 7, 2)
        hessian, _ = edge_pushing_hessian(forward_sweep(tape, [0.3, 0.9]))
        assert hessian.entries == []
        assert hessian.stats.allocated_edges == 0
        assert hessian.stats.node_visits == tape.ell

    def test_requires_forward_sweep(self, worked_tape):
        with pytest.raises(StateError):
            edge_pushing_hessian(worked_tape)

    def test_overflowing_weight_reports_node(self):
        tape = record(lambda x: 1e200 * sin(1e200 * x[0]), 1)
        with pytest.raises(NumericError) as info:
            edge_pushing_hessian(forward_sweep(tape, [1.0]))
        assert info.value.node_id is not None

    def test_entries_sorted_lower_triangle(self):
        tape = make_family("arrow", 12)
        hessian, _ = edge_pushing_hessian(forward_sweep(tape, np.linspace(0.5, 1.5, 12)))
        assert hessian.entries == sorted(hessian.entries)
        assert all(r >= c for r, c, _ in hessian.entries)
        assert len(hessian.pattern()) == hessian.nnz == 23

    def test_drop_tol(self, worked_tape):
        swept = forward_sweep(worked_tape, WORKED_POINT)
        hessian, _ = edge_pushing_hessian(swept, drop_tol=5.0)
        assert hessian.as_dict() == {(1, 1): 10.0}

    def test_debug_checks_enabled_by_environment(self, worked_tape, monkeypatch):
        monkeypatch.setenv("HESSCRAFT_DEBUG_CHECKS", "1")
        reset_config()
        swept = forward_sweep(worked_tape, WORKED_POINT)
        with patch.object(SparseSymAccumulator, "check_block_support") as check:
            edge_pushing_hessian(swept)
        assert check.call_count == worked_tape.ell

    def test_observer_sees_shrinking_block(self, worked_tape):
        seen = []

        def observe(node_id, acc, vbar):
            acc.check_block_support(node_id)
            seen.append(node_id)

        edge_pushing_hessian(forward_sweep(worked_tape, WORKED_POINT), observer=observe)
        assert seen == list(range(worked_tape.size - 1, worked_tape.n - 1, -1))

    def test_visit_counters_follow_the_sweep(self, worked_tape):
        seen = []
        swept = forward_sweep(worked_tape, WORKED_POINT)
        hessian, adjoints = edge_pushing_hessian(swept, observer=lambda i, acc, vbar: seen.append(i))
        assert hessian.stats.node_visits == adjoints.visits == len(seen) == worked_tape.ell
        assert reverse_gradient(swept).adjoints.visits == len(seen)


class TestSparseHessian:
    def test_dense_round_trip_and_matvec(self):
        dense = np.array([[2.0, 1.0, 0.0], [1.0, 0.0, -3.0], [0.0, -3.0, 5.0]])
        hessian = SparseHessian.from_dense(dense)
        assert hessian.entries == [(0, 0, 2.0), (1, 0, 1.0), (2, 1, -3.0), (2, 2, 5.0)]
        np.testing.assert_array_equal(hessian.to_dense(), dense)
        d = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(hessian.matvec(d), dense @ d)
        assert hessian.get(1, 2) == -3.0

    def test_to_coo_keeps_lower_triangle(self):
        hessian = SparseHessian(2, [(0, 0, 1.0), (1, 0, 0.0)])
        coo = hessian.to_coo()
        assert coo.shape == (2, 2)
        assert coo.nnz == 2

    def test_matrix_market_text(self, worked_tape):
        hessian, _ = edge_pushing_hessian(forward_sweep(worked_tape, WORKED_POINT))
        text = hessian.matrix_market()
        lines = text.splitlines()
        assert lines[0].lower() == "%%matrixmarket matrix coordinate real symmetric"
        body = [line.split() for line in lines if line and not line.startswith("%")]
        assert body[0] == ["3", "3", "5"]
        entries = {(int(r), int(c)): float(v) for r, c, v in body[1:]}
        assert entries == {(r + 1, c + 1): v for (r, c), v in WORKED_HESSIAN.items()}

    def test_write_matrix_market_to_stream_and_path(self, tmp_path):
        hessian = SparseHessian(2, [(1, 0, 0.5)])
        stream = io.StringIO()
        hessian.write_matrix_market(stream)
        path = tmp_path / "h.mtx"
        hessian.write_matrix_market(path)
        assert path.read_text(encoding="ascii") == stream.getvalue()


class TestStructuralPattern:
    def test_worked_example(self, worked_tape):
        assert structural_pattern(worked_tape).pattern() == {(1, 0), (2, 0), (1, 1), (2, 1), (2, 2)}

    def test_linear(self):
        assert structural_pattern(record(lambda x: 3 * x[0] + x[1] - 7, 2)).entries == []

    def test_band1_n6(self):
        pattern = structural_pattern(make_family("band1", 6))
        expected = {(i, i) for i in range(6)} | {(i + 1, i) for i in range(5)}
        assert pattern.pattern() == expected
        assert all(v == 1.0 for _, _, v in pattern.entries)

    def test_zero_scale_hides_dependency(self):
        tape = record(lambda x: sin(x[0]) * 0.0 + x[1] * x[2], 3)
        assert structural_pattern(tape).pattern() == {(2, 1)}


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_invariants_hold_on_random_tapes(seed):
    tape, x = random_tape(np.random.default_rng(seed))
    swept = forward_sweep(tape, x)
    hessian, adjoints = edge_pushing_hessian(swept, drop_tol=0.0, check_invariants=True)
    _, reference = reverse_gradient(swept)
    assert adjoints.vbar == reference.vbar
    assert hessian.pattern() == structural_pattern(tape).pattern()


@settings(max_examples=200, deadline=None)
@given(seeds, st.integers(min_value=0, max_value=1000))
def test_result_independent_of_edge_order(seed, shuffle_seed):
    tape, x = random_tape(np.random.default_rng(seed))
    swept = forward_sweep(tape, x)
    plain, _ = edge_pushing_hessian(swept, drop_tol=0.0)
    shuffled, _ = edge_pushing_hessian(swept, drop_tol=0.0, neighbor_order_seed=shuffle_seed)
    assert plain.pattern() == shuffled.pattern()
    assert relative_discrepancy(shuffled, plain) <= 1e-12
