"""
Sparse Hessian by edge pushing.

One backward sweep over the tape maintains a sparse symmetric accumulator W.
At node i, in this order:

    pushing   every edge {i, p} is replaced by shortcut edges at the
              predecessors of i and then freed
    creating  vbar[i] * d2phi_i / dv_j dv_k is added to w_{jk} for each
              unordered predecessor pair
    adjoint   vbar[j] += vbar[i] * c_j

At termination the block of W among the independent nodes is the Hessian.

Usage:
    swept = forward_sweep(tape, x)
    hessian, adjoints = edge_pushing_hessian(swept)
    hessian.write_matrix_market("h.mtx")
"""

from __future__ import annotations

import io
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    IO,
    Dict,
    Iterator,
    List,
    NamedTuple,
    Optional,
    Protocol,
    Sequence,
    Set,
    Tuple,
    Union,
)

import numpy as np
import scipy.io
import scipy.sparse

from core.config import get_config
from core.elementals import structural_d1, structural_d2
from core.errors import DimensionError, InvariantViolation, NumericError
from core.reverse_gradient import AdjointVector
from core.tape import Tape, require_swept

Entry = Tuple[int, int, float]


# ---------------------------------------------------------------------------
# Accumulator
# ---------------------------------------------------------------------------


class SparseSymAccumulator:
    """
    Undirected weighted graph G_W over node ids 0..size-1.

    Each node keeps a dict neighbor -> weight. An edge {j, k} with j != k is
    stored at both endpoints with the same weight; a loop {j, j} is stored
    once at j.
    """

    def __init__(self, size: int, shuffle_seed: Optional[int] = None):
        self._adj: List[Dict[int, float]] = [{} for _ in range(size)]
        self._rng = random.Random(shuffle_seed) if shuffle_seed is not None else None
        self.live_edges = 0
        self.allocated_edges = 0
        self.last_detached: List[Tuple[int, float]] = []

    def __len__(self) -> int:
        return self.live_edges

    def add(self, j: int, k: int, w: float, node_id: Optional[int] = None) -> None:
        """w_{jk} += w, allocating the edge when absent."""
        row = self._adj[j]
        old = row.get(k)
        if old is None:
            new = w
            self.live_edges += 1
            self.allocated_edges += 1
        else:
            new = old + w
        if not math.isfinite(new):
            raise NumericError(f"non-finite accumulator weight w[{j},{k}]", node_id=node_id)
        row[k] = new
        if j != k:
            self._adj[k][j] = new

    def weight(self, j: int, k: int) -> float:
        return self._adj[j].get(k, 0.0)

    def neighbors(self, j: int) -> Dict[int, float]:
        return self._adj[j]

    def degree(self, j: int) -> int:
        return len(self._adj[j])

    def detach(self, i: int) -> List[Tuple[int, float]]:
        """Remove every edge incident to i and return them as (p, w_ip)."""
        row = self._adj[i]
        edges = list(row.items())
        if self._rng is not None:
            self._rng.shuffle(edges)
        for p, _ in edges:
            if p != i:
                del self._adj[p][i]
        row.clear()
        self.live_edges -= len(edges)
        self.last_detached = edges
        return edges

    def edges(self) -> Iterator[Entry]:
        """Each live edge once as (j, k, w) with j >= k, in node order."""
        for j, row in enumerate(self._adj):
            for k in sorted(row):
                if k <= j:
                    yield j, k, row[k]

    def check_symmetry(self, node_id: Optional[int] = None) -> None:
        for j, row in enumerate(self._adj):
            for k, w in row.items():
                if k != j and self._adj[k].get(j) != w:
                    raise InvariantViolation(
                        f"accumulator asymmetric at ({j},{k})", node_id=node_id
                    )

    def check_block_support(self, bound: int) -> None:
        """No edge may touch a node with id >= bound."""
        for j, row in enumerate(self._adj):
            if not row:
                continue
            if j >= bound or max(row) >= bound:
                raise InvariantViolation(
                    f"edge at node {j} outside the leading {bound}x{bound} block", node_id=bound
                )


class SweepObserver(Protocol):
    """Called after each node sweep with the node id, accumulator and adjoints."""

    def __call__(self, node_id: int, accumulator: SparseSymAccumulator, vbar: Sequence[float]) -> None:
        ...


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------


@dataclass
class EdgePushingStats:
    """
    Work and memory counters of one sweep.

    Attributes:
        allocated_edges: Accumulator edges ever created
        peak_live_edges: Largest number of simultaneously live edges
        pushes_case_i: Pushes of an edge {i, p} with p not a predecessor
        pushes_case_ii: Pushes of a loop {i, i}
        pushes_case_iii: Pushes of an edge {i, p} with p a predecessor
        creations: Second-derivative contributions added
        max_degree: Largest degree of a node at the moment it was swept
        node_visits: Intermediates swept
    """

    allocated_edges: int = 0
    peak_live_edges: int = 0
    pushes_case_i: int = 0
    pushes_case_ii: int = 0
    pushes_case_iii: int = 0
    creations: int = 0
    max_degree: int = 0
    node_visits: int = 0


@dataclass
class SparseHessian:
    """
    Lower triangle (row >= col, diagonal included) of a symmetric n x n matrix.

    Entries are sorted lexicographically with no duplicate positions.
    """

    n: int
    entries: List[Entry] = field(default_factory=list)
    stats: Optional[EdgePushingStats] = field(default=None, compare=False, repr=False)

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Entry]:
        return iter(self.entries)

    def get(self, row: int, col: int) -> float:
        if row < col:
            row, col = col, row
        for r, c, v in self.entries:
            if r == row and c == col:
                return v
        return 0.0

    def as_dict(self) -> Dict[Tuple[int, int], float]:
        return {(r, c): v for r, c, v in self.entries}

    def pattern(self) -> Set[Tuple[int, int]]:
        return {(r, c) for r, c, _ in self.entries}

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        for r, c, v in self.entries:
            dense[r, c] = v
            dense[c, r] = v
        return dense

    def to_coo(self) -> scipy.sparse.coo_matrix:
        """Lower triangle as a scipy coo matrix (explicit zeros kept)."""
        if self.entries:
            rows, cols, vals = zip(*self.entries)
        else:
            rows, cols, vals = (), (), ()
        return scipy.sparse.coo_matrix(
            (np.asarray(vals, dtype=float), (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))),
            shape=(self.n, self.n),
        )

    def matvec(self, d: Sequence[float]) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if d.shape != (self.n,):
            raise DimensionError(f"direction has shape {d.shape}, expected ({self.n},)")
        out = np.zeros(self.n)
        for r, c, v in self.entries:
            out[r] += v * d[c]
            if r != c:
                out[c] += v * d[r]
        return out

    def drop(self, tol: float) -> "SparseHessian":
        """Copy without entries of magnitude below tol (tol 0 keeps everything)."""
        if tol <= 0.0:
            return SparseHessian(self.n, list(self.entries), self.stats)
        return SparseHessian(self.n, [e for e in self.entries if abs(e[2]) >= tol], self.stats)

    @classmethod
    def from_dense(cls, matrix: np.ndarray, threshold: float = 0.0) -> "SparseHessian":
        """Lower triangle of a dense matrix, keeping |a_rc| > threshold."""
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[0]
        entries = [
            (r, c, float(matrix[r, c]))
            for r in range(n)
            for c in range(r + 1)
            if abs(matrix[r, c]) > threshold
        ]
        return cls(n, entries)

    def matrix_market(self) -> str:
        """Matrix Market coordinate real symmetric text (1-based, lower triangle)."""
        buffer = io.BytesIO()
        scipy.io.mmwrite(buffer, self.to_coo(), symmetry="symmetric", precision=17)
        return buffer.getvalue().decode("ascii")

    def write_matrix_market(self, target: Union[str, Path, IO[str]]) -> None:
        text = self.matrix_market()
        if isinstance(target, (str, Path)):
            with open(target, "w", encoding="ascii", newline="\n") as f:
                f.write(text)
        else:
            target.write(text)


class EdgePushingResult(NamedTuple):
    hessian: SparseHessian
    adjoints: AdjointVector


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def edge_pushing_hessian(
    tape: Tape,
    drop_tol: Optional[float] = None,
    check_invariants: Optional[bool] = None,
    observer: Optional[SweepObserver] = None,
    neighbor_order_seed: Optional[int] = None,
) -> EdgePushingResult:
    """
    Compute the Hessian of a swept tape together with its adjoints.

    Args:
        tape: Tape returned by forward_sweep
        drop_tol: Drop entries with |w| below this (None = config drop_tol)
        check_invariants: Assert symmetry and block support after every node
            (None = config debug_checks)
        observer: Called after each node sweep
        neighbor_order_seed: Shuffle the order in which incident edges are pushed

    Returns:
        EdgePushingResult(hessian, adjoints); hessian.stats holds the sweep counters

    Raises:
        StateError: if the tape has not been swept
        NumericError: if a weight or adjoint becomes non-finite
        InvariantViolation: if an enabled invariant check fails
    """
    require_swept(tape)
    config = get_config()
    if drop_tol is None:
        drop_tol = config.get_drop_tol()
    if check_invariants is None:
        check_invariants = config.get_debug_checks()

    n, size = tape.n, tape.size
    acc = SparseSymAccumulator(size, neighbor_order_seed)
    adj = AdjointVector.seeded(size)
    vbar = adj.vbar
    # structural nonzero-ness of each adjoint
    reach = [False] * size
    reach[-1] = True
    stats = EdgePushingStats()
    madds = 0

    for i in range(size - 1, n - 1, -1):
        node = tape.nodes[i]
        stats.node_visits += 1
        preds, c = node.preds, node.d1
        sd1 = structural_d1(node.op, node.payload)
        vi = vbar[i]

        # pushing
        edges = acc.detach(i)
        stats.max_degree = max(stats.max_degree, len(edges))
        for p, w in edges:
            if p == i:
                stats.pushes_case_ii += 1
                for a in range(len(preds)):
                    if not sd1[a]:
                        continue
                    ja = preds[a]
                    acc.add(ja, ja, c[a] * c[a] * w, i)
                    for b in range(a + 1, len(preds)):
                        if sd1[b]:
                            acc.add(ja, preds[b], c[a] * c[b] * w, i)
            elif p in preds:
                stats.pushes_case_iii += 1
                for a, j in enumerate(preds):
                    if not sd1[a]:
                        continue
                    if j == p:
                        acc.add(p, p, 2.0 * c[a] * w, i)
                    else:
                        acc.add(j, p, c[a] * w, i)
            else:
                stats.pushes_case_i += 1
                for a, j in enumerate(preds):
                    if sd1[a]:
                        acc.add(j, p, c[a] * w, i)

        # creating
        if reach[i]:
            sd2 = structural_d2(node.op, node.payload)
            if len(preds) == 1:
                if sd2[0]:
                    acc.add(preds[0], preds[0], vi * node.d2[0], i)
                    stats.creations += 1
            elif len(preds) == 2:
                j, k = preds
                for (a, b), flag, d2 in zip(((j, j), (j, k), (k, k)), sd2, node.d2):
                    if flag:
                        acc.add(a, b, vi * d2, i)
                        stats.creations += 1

        stats.peak_live_edges = max(stats.peak_live_edges, acc.live_edges)

        # adjoint, same arithmetic and order as reverse_gradient
        for a, (p, cp) in enumerate(zip(preds, c)):
            vbar[p] += vi * cp
            madds += 1
            if not math.isfinite(vbar[p]):
                raise NumericError(f"non-finite adjoint of node {p}", node_id=i)
            if reach[i] and sd1[a]:
                reach[p] = True

        if check_invariants:
            acc.check_symmetry(i)
            acc.check_block_support(i)
        if observer is not None:
            observer(i, acc, vbar)

    stats.allocated_edges = acc.allocated_edges
    adj.visits = stats.node_visits
    adj.multiply_adds = madds

    hessian = SparseHessian(n, list(acc.edges()), stats).drop(drop_tol)
    return EdgePushingResult(hessian, adj)


def structural_pattern(tape: Tape) -> SparseHessian:
    """
    Union-over-all-points Hessian pattern, all values 1.

    Runs the edge-pushing sweep over edge presence with the local partials
    replaced by their structural nonzero flags. No forward sweep is needed.
    """
    n, size = tape.n, tape.size
    adj: List[Set[int]] = [set() for _ in range(size)]
    reach = [False] * size
    reach[-1] = True

    def link(j: int, k: int) -> None:
        adj[j].add(k)
        adj[k].add(j)

    for i in range(size - 1, n - 1, -1):
        node = tape.nodes[i]
        live = [p for p, flag in zip(node.preds, structural_d1(node.op, node.payload)) if flag]

        incident = adj[i]
        adj[i] = set()
        for p in incident:
            if p != i:
                adj[p].discard(i)
        for p in incident:
            if p == i:
                for a, j in enumerate(live):
                    for k in live[a:]:
                        link(j, k)
            else:
                for j in live:
                    link(j, p)

        if reach[i]:
            preds = node.preds
            pairs = ((preds[0], preds[0]),) if len(preds) == 1 else ()
            if len(preds) == 2:
                pairs = ((preds[0], preds[0]), (preds[0], preds[1]), (preds[1], preds[1]))
            for (j, k), flag in zip(pairs, structural_d2(node.op, node.payload)):
                if flag:
                    link(j, k)
            for p in live:
                reach[p] = True

    entries = [(j, k, 1.0) for j in range(n) for k in sorted(adj[j]) if k <= j]
    return SparseHessian(n, entries)
