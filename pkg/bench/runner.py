"""
Timing harness for the benchmark families.

Each measurement is the median of `repeats` runs after one warm-up run,
timed with perf_counter_ns. Phases:

    hessian-only  edge_pushing_hessian over an already swept tape
    total         recording + forward sweep + edge_pushing_hessian
    forward       forward sweep only
"""

from __future__ import annotations

import csv
import statistics
import sys
import time
from dataclasses import astuple, dataclass
from typing import Callable, Iterable, List, Optional, Sequence, TextIO

import numpy as np
from tqdm import tqdm

from bench.family_manager import FamilyManager, get_family_manager
from core.config import get_config
from core.edge_pushing import SparseHessian, edge_pushing_hessian
from core.tape import forward_sweep, record

PHASES = ("hessian-only", "total", "forward")
CSV_HEADER = ("family", "n", "ell", "phase", "median_ns", "nnz", "peak_live_edges")


@dataclass
class BenchRecord:
    family: str
    n: int
    ell: int
    phase: str
    median_ns: int
    nnz: int
    peak_live_edges: int


def bench_point(n: int, seed: int = 0) -> np.ndarray:
    """Seeded uniform point in [0.5, 1.5]^n."""
    return np.random.default_rng(seed).uniform(0.5, 1.5, size=n)


def _median_ns(run: Callable[[], object], repeats: int) -> int:
    run()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter_ns()
        run()
        samples.append(time.perf_counter_ns() - start)
    return int(statistics.median(samples))


def run_bench(
    family: str,
    n: int,
    repeats: Optional[int] = None,
    phase: str = "hessian-only",
    seed: int = 0,
    manager: Optional[FamilyManager] = None,
) -> BenchRecord:
    """
    Time one (family, n, phase) combination.

    Raises:
        UnknownFamilyError: if the family is not registered
        ValueError: if the phase is unknown
    """
    if phase not in PHASES:
        raise ValueError(f"Unknown phase: {phase} (expected one of {', '.join(PHASES)})")
    if repeats is None:
        repeats = get_config().get_bench_repeats()
    manager = manager or get_family_manager()
    spec = manager.get_family(family)
    tape = manager.make_family(family, n)
    x = bench_point(n, seed)
    swept = forward_sweep(tape, x)
    result: List[SparseHessian] = []

    if phase == "hessian-only":
        def run():
            result[:] = [edge_pushing_hessian(swept, drop_tol=0.0, check_invariants=False).hessian]
    elif phase == "total":
        def run():
            t = forward_sweep(record(spec.program, n), x)
            result[:] = [edge_pushing_hessian(t, drop_tol=0.0, check_invariants=False).hessian]
    else:
        def run():
            forward_sweep(tape, x)

    median = _median_ns(run, repeats)
    hessian = result[0] if result else edge_pushing_hessian(swept, drop_tol=0.0, check_invariants=False).hessian
    return BenchRecord(
        family=family,
        n=n,
        ell=tape.ell,
        phase=phase,
        median_ns=median,
        nnz=hessian.nnz,
        peak_live_edges=hessian.stats.peak_live_edges,
    )


def run_benches(
    families: Sequence[str],
    sizes: Sequence[int],
    phases: Sequence[str] = ("hessian-only",),
    repeats: Optional[int] = None,
    seed: int = 0,
    progress: bool = True,
) -> List[BenchRecord]:
    """Every (family, n, phase) combination, in that nesting order."""
    jobs = [(f, n, p) for f in families for n in sizes for p in phases]
    records = []
    for family, n, phase in tqdm(jobs, desc="bench", unit="run", file=sys.stderr, disable=not progress):
        records.append(run_bench(family, n, repeats, phase, seed))
    return records


def write_csv(records: Iterable[BenchRecord], stream: TextIO, header: bool = True) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    if header:
        writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(astuple(rec))

