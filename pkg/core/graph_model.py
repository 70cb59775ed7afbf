"""
Graph model of the Hessian.

The gradient computational graph holds the original graph, a mirror copy
carrying the adjoints, and nonlinear arcs from original nodes to mirror
nodes. Folding the mirror copy back onto the original leaves the directed
arcs of the tape plus undirected nonlinear arcs (loops allowed) whose weight
is

    w_{rs} = sum over common successors k of vbar_k * d2phi_k / dv_r dv_s

A second derivative d2f/dx_i dx_j is then the sum of the weights of all
tri-parted paths: a directed path i -> r, one nonlinear arc {r, s}, and a
directed path j -> s traveled backward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from core.config import get_config
from core.edge_pushing import SparseHessian, SparseSymAccumulator, edge_pushing_hessian
from core.elementals import structural_d2
from core.errors import CapacityError, InvariantViolation, StateError
from core.reverse_gradient import AdjointVector
from core.tape import Tape, forward_sweep, require_swept

Arc = Tuple[int, int]


def tape_digraph(tape: Tape) -> nx.DiGraph:
    """Directed graph of the tape; arcs j -> i carry weight c^i_j when swept."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(tape.size))
    for node in tape.nodes[tape.n:]:
        weights = node.d1 if tape.swept else (None,) * len(node.preds)
        for p, c in zip(node.preds, weights):
            graph.add_edge(p, node.index, weight=c)
    return graph


def _d2_pairs(preds: Tuple[int, ...]) -> Tuple[Arc, ...]:
    if len(preds) == 1:
        return ((preds[0], preds[0]),)
    if len(preds) == 2:
        j, k = preds
        return ((j, j), (j, k), (k, k))
    return ()


def _key(r: int, s: int) -> Arc:
    return (r, s) if r >= s else (s, r)


@dataclass
class FoldedGradientGraph:
    """
    Folded gradient graph.

    Attributes:
        n: Number of independent nodes
        size: n + l
        directed: Original arcs j -> i with weight c^i_j
        nonlinear: Undirected arcs keyed (r, s) with r >= s
    """

    n: int
    size: int
    directed: nx.DiGraph
    nonlinear: Dict[Arc, float] = field(default_factory=dict)

    @property
    def directed_arcs(self) -> Dict[Arc, float]:
        return {(j, i): data["weight"] for j, i, data in sorted(self.directed.edges(data=True))}

    def nonlinear_arcs(self) -> List[Tuple[int, int, float]]:
        return [(r, s, w) for (r, s), w in sorted(self.nonlinear.items())]


def build_folded_graph(tape: Tape, adjoints: AdjointVector) -> FoldedGradientGraph:
    """
    Fold the gradient graph of a swept tape.

    Nonlinear arcs whose second partials are structurally zero at every
    common successor are omitted.

    Raises:
        StateError: if the tape is not swept or the adjoints belong to another tape
    """
    require_swept(tape)
    if len(adjoints) != tape.size:
        raise StateError(f"adjoints have {len(adjoints)} entries, tape has {tape.size} nodes")

    nonlinear: Dict[Arc, float] = {}
    for node in tape.nodes[tape.n:]:
        vk = adjoints[node.index]
        flags = structural_d2(node.op, node.payload)
        for (r, s), flag, d2 in zip(_d2_pairs(node.preds), flags, node.d2):
            if flag:
                key = _key(r, s)
                nonlinear[key] = nonlinear.get(key, 0.0) + vk * d2
    return FoldedGradientGraph(tape.n, tape.size, tape_digraph(tape), nonlinear)


# ---------------------------------------------------------------------------
# Path enumeration
# ---------------------------------------------------------------------------


def _check_cap(size: int, cap: Optional[int]) -> None:
    if cap is None:
        cap = get_config().get_path_enum_cap()
    if size > cap:
        raise CapacityError(f"path enumeration limited to n + l <= {cap}, graph has {size} nodes")


def _path_weight(graph: nx.DiGraph, path: Sequence[int]) -> float:
    weight = 1.0
    for a, b in zip(path, path[1:]):
        weight *= graph[a][b]["weight"]
    return weight


def _paths(graph: nx.DiGraph, source: int, target: int) -> Iterator[List[int]]:
    if source == target:
        yield [source]
        return
    yield from nx.all_simple_paths(graph, source, target)


class TriPartedPath(NamedTuple):
    """Directed head i -> r, nonlinear arc {r, s}, directed tail j -> s walked backward."""

    head: Tuple[int, ...]
    arc: Arc
    tail: Tuple[int, ...]
    weight: float

    @property
    def endpoints(self) -> Arc:
        return self.head[0], self.tail[0]


def tri_parted_paths(graph: FoldedGradientGraph, cap: Optional[int] = None) -> Iterator[TriPartedPath]:
    """
    Every tri-parted path between independent nodes, each exactly once.

    A loop {r, r} is traversed once; a non-loop arc {r, s} is traversed in
    both orientations.
    """
    _check_cap(graph.size, cap)
    dg = graph.directed
    for (r, s), w in sorted(graph.nonlinear.items()):
        orientations = ((r, s),) if r == s else ((r, s), (s, r))
        for a, b in orientations:
            for i in range(graph.n):
                for head in _paths(dg, i, a):
                    wh = _path_weight(dg, head)
                    for j in range(graph.n):
                        for tail in _paths(dg, j, b):
                            yield TriPartedPath(
                                tuple(head), (a, b), tuple(tail), wh * w * _path_weight(dg, tail)
                            )


def path_sums_to(graph: nx.DiGraph, sources: Sequence[int], target: int) -> Dict[int, float]:
    """Sum of path weights from each source to target (1 for source == target)."""
    return {i: sum(_path_weight(graph, p) for p in _paths(graph, i, target)) for i in sources}


def path_enumeration_hessian(graph: FoldedGradientGraph, cap: Optional[int] = None) -> SparseHessian:
    """
    Hessian from tri-parted path weights.

    Per nonlinear arc the head and tail path sums are enumerated separately
    and multiplied, which adds up the same terms as tri_parted_paths without
    forming every combination.

    Raises:
        CapacityError: if the graph exceeds the enumeration cap
    """
    _check_cap(graph.size, cap)
    n, dg = graph.n, graph.directed
    sources = range(n)
    sums: Dict[int, Dict[int, float]] = {}

    def to(r: int) -> Dict[int, float]:
        if r not in sums:
            sums[r] = path_sums_to(dg, sources, r)
        return sums[r]

    hess = np.zeros((n, n))
    for (r, s), w in sorted(graph.nonlinear.items()):
        pr, ps = to(r), to(s)
        head = np.array([pr[i] for i in sources])
        tail = np.array([ps[j] for j in sources])
        hess += w * np.outer(head, tail)
        if r != s:
            hess += w * np.outer(tail, head)
    return SparseHessian.from_dense(hess)


def path_weight_sums(tape: Tape, target: Optional[int] = None, cap: Optional[int] = None) -> np.ndarray:
    """
    For every node j, the sum over directed paths j -> target of the product
    of arc weights. With target the output this reproduces the adjoints.
    """
    require_swept(tape)
    _check_cap(tape.size, cap)
    if target is None:
        target = tape.output
    sums = path_sums_to(tape_digraph(tape), range(tape.size), target)
    return np.array([sums[j] for j in range(tape.size)])


# ---------------------------------------------------------------------------
# Unfolded gradient graph (debug)
# ---------------------------------------------------------------------------


def original(i: int) -> Tuple[str, int]:
    return ("v", i)


def mirror(i: int) -> Tuple[str, int]:
    return ("vbar", i)


def build_unfolded_gradient_graph(tape: Tape, adjoints: AdjointVector) -> nx.DiGraph:
    """
    Gradient computational graph with an explicit mirror copy.

    Nodes are ("v", i) and ("vbar", i). Edges carry `weight` and `kind`
    (original, mirror or nonlinear). A nonlinear arc {r, s} becomes r -> s-bar
    and s -> r-bar. Paths ("v", i) -> ("vbar", j) sum to d2f/dx_i dx_j.

    Raises:
        InvariantViolation: if an arc and its mirror carry different weights
    """
    folded = build_folded_graph(tape, adjoints)
    graph = nx.DiGraph()
    for i in range(tape.size):
        graph.add_node(original(i), adjoint=adjoints[i])
        graph.add_node(mirror(i), adjoint=adjoints[i])
    for j, i, data in folded.directed.edges(data=True):
        graph.add_edge(original(j), original(i), weight=data["weight"], kind="original")
        graph.add_edge(mirror(i), mirror(j), weight=data["weight"], kind="mirror")
    for (r, s), w in folded.nonlinear.items():
        graph.add_edge(original(r), mirror(s), weight=w, kind="nonlinear")
        graph.add_edge(original(s), mirror(r), weight=w, kind="nonlinear")
    check_mirror_weights(graph)
    return graph


def check_mirror_weights(graph: nx.DiGraph) -> None:
    for a, b, data in graph.edges(data=True):
        if data["kind"] != "original":
            continue
        twin = graph.get_edge_data(mirror(b[1]), mirror(a[1]))
        if twin is None or twin["weight"] != data["weight"]:
            raise InvariantViolation(f"mirror of arc ({a[1]},{b[1]}) has a different weight", node_id=b[1])


# ---------------------------------------------------------------------------
# Sweep snapshots
# ---------------------------------------------------------------------------


@dataclass
class SweepSnapshot:
    """
    State of the accumulator right after node `node_id` was swept.

    Attributes:
        node_id: Node just swept; the remaining graph has ids < node_id
        n: Number of independent nodes
        directed: Tape arcs among the remaining nodes
        nonlinear: Live accumulator edges keyed (r, s) with r >= s
        pushed: Edges already pushed (filled when keep_pushed is set)
        adjoints: Adjoint vector at this point of the sweep
    """

    node_id: int
    n: int
    directed: Dict[Arc, float]
    nonlinear: Dict[Arc, float]
    pushed: Dict[Arc, float] = field(default_factory=dict)
    adjoints: Tuple[float, ...] = ()


def sweep_snapshots(tape: Tape, x: Optional[Sequence[float]] = None, keep_pushed: bool = False) -> List[SweepSnapshot]:
    """
    Run edge_pushing and record the folded graph after every node sweep.

    Args:
        tape: Finalized tape (swept when x is None)
        x: Point to sweep at
        keep_pushed: Keep pushed edges in the snapshots instead of hiding them
    """
    swept = forward_sweep(tape, x) if x is not None else tape
    require_swept(swept)
    arcs = {(j, i): data["weight"] for j, i, data in tape_digraph(swept).edges(data=True)}
    snapshots: List[SweepSnapshot] = []
    pushed: Dict[Arc, float] = {}

    def observe(node_id: int, acc: SparseSymAccumulator, vbar: Sequence[float]) -> None:
        if keep_pushed:
            for p, w in acc.last_detached:
                pushed[_key(node_id, p)] = w
        snapshots.append(
            SweepSnapshot(
                node_id=node_id,
                n=swept.n,
                directed={(j, i): c for (j, i), c in arcs.items() if i < node_id},
                nonlinear={(r, s): w for r, s, w in acc.edges()},
                pushed=dict(pushed),
                adjoints=tuple(vbar),
            )
        )

    edge_pushing_hessian(swept, drop_tol=0.0, observer=observe)
    return snapshots


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------


@dataclass
class DotOptions:
    """
    Rendering options for export_dot.

    Attributes:
        name: Graph name
        show_weights: Label arcs with their weights
        precision: Format spec for weights
        rankdir: Graphviz rank direction
    """

    name: str = "G"
    show_weights: bool = True
    precision: str = ".6g"
    rankdir: str = "BT"


def node_label(i: int, n: int) -> str:
    """x1..xn for independents, 1..l for intermediates."""
    return f"x{i + 1}" if i < n else str(i - n + 1)


def export_dot(
    source: Union[Tape, FoldedGradientGraph, SweepSnapshot],
    options: Optional[DotOptions] = None,
) -> str:
    """
    Render a tape, folded graph or sweep snapshot as a DOT digraph.

    Directed arcs are solid, nonlinear arcs dashed with dir=none, pushed
    arcs (snapshots with keep_pushed) dotted and gray. Nodes and arcs are
    emitted in id order.
    """
    options = options or DotOptions()

    if isinstance(source, Tape):
        n, size = source.n, source.size
        directed = {(j, i): data["weight"] for j, i, data in tape_digraph(source).edges(data=True)}
        nonlinear: Dict[Arc, float] = {}
        pushed: Dict[Arc, float] = {}
        ops = {node.index: node.op.value for node in source.nodes}
    elif isinstance(source, FoldedGradientGraph):
        n, size = source.n, source.size
        directed, nonlinear, pushed, ops = source.directed_arcs, source.nonlinear, {}, {}
    else:
        n, size = source.n, max([source.node_id] + [r + 1 for r, _ in source.pushed])
        directed, nonlinear, pushed, ops = source.directed, source.nonlinear, source.pushed, {}

    def fmt(w: Optional[float]) -> str:
        if not options.show_weights or w is None:
            return ""
        return f' label="{format(w, options.precision)}"'

    lines = [f"digraph {options.name} {{", f"  rankdir={options.rankdir};"]
    for i in range(size):
        label = node_label(i, n)
        if i in ops and i >= n:
            label = f"{label}: {ops[i]}"
        shape = "box" if i < n else "ellipse"
        lines.append(f'  n{i} [label="{label}" shape={shape}];')
    for (j, i), w in sorted(directed.items()):
        lines.append(f"  n{j} -> n{i} [style=solid{fmt(w)}];")
    for (r, s), w in sorted(nonlinear.items()):
        lines.append(f"  n{r} -> n{s} [style=dashed dir=none{fmt(w)}];")
    for (r, s), w in sorted(pushed.items()):
        lines.append(f"  n{r} -> n{s} [style=dotted color=gray dir=none{fmt(w)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
