"""
Tests for the benchmark families, their closed-form pattern counts and the timing harness.
"""

import io

import numpy as np
import pytest

from bench.family_manager import FamilyManager, get_family_manager
from bench.families import Lcg, irregular_pattern
from bench.runner import CSV_HEADER, BenchRecord, bench_point, run_bench, run_benches, write_csv
from core.config import get_config
from core.edge_pushing import edge_pushing_hessian, structural_pattern
from core.errors import DimensionError, UnknownFamilyError
from core.oracles import fd_hessian, relative_discrepancy
from core.tape import forward_sweep

FAMILIES = [
    "band1", "band2", "band5", "arrow", "frame_diag",
    "block_diag5", "irregular", "arrow_band1", "arrow_band3", "linear",
]


def test_registry_lists_every_family():
    assert get_family_manager().names() == FAMILIES


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n", [10, 20, 50, 500])
def test_structural_pattern_matches_closed_form(family, n):
    manager = get_family_manager()
    pattern = structural_pattern(manager.make_family(family, n))
    assert pattern.nnz == manager.expected_nnz(family, n)


@pytest.mark.parametrize("family", FAMILIES)
def test_smallest_sizes(family):
    manager = get_family_manager()
    low = manager.get_family(family).min_n
    for n in range(low, low + 6):
        assert structural_pattern(manager.make_family(family, n)).nnz == manager.expected_nnz(family, n)


def _band(n, width):
    return {(r, c) for r in range(n) for c in range(max(0, r - width), r + 1)}


def _last_row(n):
    return {(n - 1, c) for c in range(n)}


def expected_shape(family, n):
    """Lower-triangle pattern of each family, built independently of its nnz formula."""
    diagonal = _band(n, 0)
    if family.startswith("band"):
        return _band(n, int(family[4:]))
    if family == "arrow":
        return diagonal | _last_row(n)
    if family == "frame_diag":
        return diagonal | {(r, 0) for r in range(n)} | _last_row(n)
    if family == "block_diag5":
        return {(r, c) for r in range(n) for c in range(r // 5 * 5, r + 1)}
    if family == "irregular":
        return irregular_pattern(n, get_config().get_lcg_seed())
    if family.startswith("arrow_band"):
        return _band(n, int(family[10:])) | _last_row(n)
    return set()


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n", [50, 500])
def test_structural_pattern_shape(family, n):
    pattern = structural_pattern(get_family_manager().make_family(family, n)).pattern()
    assert pattern == expected_shape(family, n)


def test_arrow_n100():
    manager = get_family_manager()
    tape = manager.make_family("arrow", 100)
    hessian, _ = edge_pushing_hessian(forward_sweep(tape, bench_point(100)))
    assert hessian.nnz == 199
    rows = {r for r, c, _ in hessian.entries if r != c}
    assert rows == {99}


def test_linear_family_pushes_nothing():
    tape = get_family_manager().make_family("linear", 1000)
    hessian, _ = edge_pushing_hessian(forward_sweep(tape, bench_point(1000)))
    assert hessian.nnz == 0
    assert hessian.stats.allocated_edges == 0
    assert hessian.stats.node_visits == tape.ell


def test_irregular_pattern_replays_generator():
    manager = FamilyManager(lcg_seed=7)
    tape = manager.make_family("irregular", 30)
    assert structural_pattern(tape).pattern() == irregular_pattern(30, 7)
    assert FamilyManager(lcg_seed=7).expected_nnz("irregular", 30) == len(irregular_pattern(30, 7))


def test_lcg_is_deterministic():
    a, b = Lcg(42), Lcg(42)
    assert [a.index(10) for _ in range(20)] == [b.index(10) for _ in range(20)]
    assert all(0 <= Lcg(3).index(5) < 5 for _ in range(10))


@pytest.mark.parametrize("family", FAMILIES)
def test_edge_pushing_matches_fd(family):
    tape = get_family_manager().make_family(family, 50)
    for seed in range(3):
        x = bench_point(50, seed)
        hessian, _ = edge_pushing_hessian(forward_sweep(tape, x))
        assert relative_discrepancy(hessian, fd_hessian(tape, x)) <= 1e-4


@pytest.mark.parametrize("family", ["band1", "arrow"])
def test_edge_pushing_matches_fd_n500(family):
    tape = get_family_manager().make_family(family, 500)
    x = bench_point(500, 1)
    hessian, _ = edge_pushing_hessian(forward_sweep(tape, x))
    assert hessian.nnz == 999
    assert relative_discrepancy(hessian, fd_hessian(tape, x)) <= 1e-4


@pytest.mark.slow
@pytest.mark.parametrize("family", FAMILIES)
def test_every_family_matches_fd_n500(family):
    tape = get_family_manager().make_family(family, 500)
    for seed in range(3):
        x = bench_point(500, seed)
        hessian, _ = edge_pushing_hessian(forward_sweep(tape, x))
        assert relative_discrepancy(hessian, fd_hessian(tape, x)) <= 1e-4


def test_unknown_family():
    with pytest.raises(UnknownFamilyError, match="Unknown family: band9"):
        get_family_manager().make_family("band9", 10)


def test_n_below_family_minimum():
    with pytest.raises(DimensionError):
        get_family_manager().make_family("band5", 5)


class TestRunner:
    def test_run_bench_record(self):
        rec = run_bench("band1", 20, repeats=1)
        assert isinstance(rec, BenchRecord)
        assert (rec.family, rec.n, rec.phase, rec.nnz) == ("band1", 20, "hessian-only", 39)
        assert rec.median_ns > 0 and rec.ell > 0

    def test_forward_phase_reports_pattern(self):
        rec = run_bench("arrow", 10, repeats=1, phase="forward")
        assert rec.nnz == 19

    def test_unknown_phase(self):
        with pytest.raises(ValueError, match="Unknown phase"):
            run_bench("band1", 10, repeats=1, phase="reverse")

    def test_run_benches_order(self):
        records = run_benches(["linear", "band1"], [5, 8], phases=("forward", "total"), repeats=1, progress=False)
        keys = [(r.family, r.n, r.phase) for r in records]
        assert keys == [
            ("linear", 5, "forward"), ("linear", 5, "total"),
            ("linear", 8, "forward"), ("linear", 8, "total"),
            ("band1", 5, "forward"), ("band1", 5, "total"),
            ("band1", 8, "forward"), ("band1", 8, "total"),
        ]

    def test_csv(self):
        stream = io.StringIO()
        write_csv([BenchRecord("band1", 10, 28, "total", 1234, 19, 3)], stream)
        assert stream.getvalue() == ",".join(CSV_HEADER) + "\nband1,10,28,total,1234,19,3\n"

    def test_bench_point_is_seeded(self):
        np.testing.assert_array_equal(bench_point(5, 3), bench_point(5, 3))
        assert np.all((bench_point(100) >= 0.5) & (bench_point(100) <= 1.5))


@pytest.mark.slow
@pytest.mark.parametrize("family", ["band1", "band5"])
def test_band_runtime_scales_linearly(family):
    small = run_bench(family, 10_000, repeats=5).median_ns
    large = run_bench(family, 100_000, repeats=5).median_ns
    assert 5.0 <= large / small <= 15.0


@pytest.mark.slow
@pytest.mark.parametrize("n", [1000, 100_000])
def test_linear_costs_about_a_forward_sweep(n):
    rec = run_bench("linear", n, repeats=5)
    forward = run_bench("linear", n, repeats=5, phase="forward").median_ns
    assert rec.peak_live_edges == 0
    assert rec.median_ns <= 3.0 * forward
