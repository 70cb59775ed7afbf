"""
Computational tape: recording, forward sweep and text serialization.

A tape is the sequential list of elementals (phi_{1-n} .. phi_l) of a scalar
function. Internally node ids are 0-based: ids 0..n-1 are the independent
variables and ids n..n+l-1 are the intermediates, the last one being the
dependent. Creation order is a topological order (every predecessor id is
smaller than the node id).

Usage:
    tape = record(lambda x: (x[0] * x[1]) * (x[0] + x[1]), n_inputs=2)
    swept = forward_sweep(tape, [1.0, 2.0])
    swept.function_value  # 6.0
"""

from __future__ import annotations

import math
import numbers
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from core.elementals import ARITY, PAYLOAD_OPS, Op, evaluate, is_linear
from core.errors import DimensionError, EvaluationError, StateError, TapeError

TAPE_HEADER = "# hesscraft-tape"
OUTPUT_MARKER = "# output"


@dataclass(frozen=True, slots=True)
class TapeNode:
    """
    One elemental on the tape.

    Attributes:
        index: Node id
        op: Operation code
        preds: Predecessor ids, at most two, all smaller than index
        payload: Constant for Const/Scale/AddConst/PowConst
        value: v_i after a forward sweep
        d1: dphi_i/dv_j per predecessor
        d2: second partials over unordered predecessor pairs (00[, 01, 11])
    """

    index: int
    op: Op
    preds: Tuple[int, ...] = ()
    payload: Optional[float] = None
    value: Optional[float] = None
    d1: Tuple[float, ...] = ()
    d2: Tuple[float, ...] = ()


@dataclass(frozen=True)
class Tape:
    """
    Recorded elemental sequence, optionally carrying forward-sweep results.

    A tape returned by forward_sweep has swept=True and every node carries its
    value and local partials. Tapes are immutable and can be shared between
    threads; every backward sweep owns its own accumulators.
    """

    n: int
    nodes: Tuple[TapeNode, ...]
    swept: bool = False

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def ell(self) -> int:
        return len(self.nodes) - self.n

    @property
    def output(self) -> int:
        return len(self.nodes) - 1

    @property
    def function_value(self) -> float:
        require_swept(self)
        return self.nodes[-1].value

    @property
    def point(self) -> Tuple[float, ...]:
        require_swept(self)
        return tuple(node.value for node in self.nodes[: self.n])

    @cached_property
    def successor_lists(self) -> Tuple[Tuple[int, ...], ...]:
        succ: List[List[int]] = [[] for _ in self.nodes]
        for node in self.nodes:
            for p in node.preds:
                succ[p].append(node.index)
        return tuple(tuple(s) for s in succ)

    def successors(self, i: int) -> Tuple[int, ...]:
        return self.successor_lists[i]

    def is_linear(self) -> bool:
        """True when every elemental has identically zero second partials."""
        return all(is_linear(node.op, node.payload) for node in self.nodes)

    def op_histogram(self) -> Dict[str, int]:
        counts = Counter(node.op.value for node in self.nodes[self.n:])
        return dict(sorted(counts.items()))

    def structure(self) -> "Tape":
        """Copy without forward-sweep data."""
        return Tape(
            self.n,
            tuple(TapeNode(nd.index, nd.op, nd.preds, nd.payload) for nd in self.nodes),
        )

    def validate(self) -> "Tape":
        """
        Check the structural invariants of a finalized tape.

        Raises:
            TapeError: describing the first violation found
        """
        if self.n <= 0:
            raise TapeError("tape needs at least one input")
        if self.ell <= 0:
            raise TapeError("tape has no intermediate nodes; the output must be an elemental")
        for i, node in enumerate(self.nodes):
            if node.index != i:
                raise TapeError("node ids are not sequential", node_id=i)
            if i < self.n:
                if node.op is not Op.INPUT:
                    raise TapeError(f"node {i} must be an input", node_id=i)
                continue
            if node.op is Op.INPUT:
                raise TapeError("input node after the independent block", node_id=i)
            if len(node.preds) != ARITY[node.op]:
                raise TapeError(f"{node.op.value} expects {ARITY[node.op]} predecessors", node_id=i)
            if any(p < 0 or p >= i for p in node.preds):
                raise TapeError("predecessor id not smaller than node id", node_id=i)
            if len(node.preds) == 2 and node.preds[0] == node.preds[1]:
                raise TapeError("binary elemental with a repeated predecessor", node_id=i)
            if (node.op in PAYLOAD_OPS) != (node.payload is not None):
                raise TapeError(f"payload mismatch for {node.op.value}", node_id=i)
        succ = self.successor_lists
        for i in range(self.n, self.size - 1):
            if not succ[i]:
                raise TapeError("intermediate without successors (dead code)", node_id=i)
        return self


def require_swept(tape: Tape) -> None:
    if not tape.swept:
        raise StateError("tape has not been swept; call forward_sweep first")


# ---------------------------------------------------------------------------
# Recording
# ---------------------------------------------------------------------------

Operand = Union["Variable", float, int]


class Variable:
    """Handle to a node under construction in a TapeBuilder."""

    __slots__ = ("builder", "index")

    def __init__(self, builder: "TapeBuilder", index: int):
        self.builder = builder
        self.index = index

    def __repr__(self) -> str:
        return f"Variable({self.index})"

    def _other(self, other: Operand) -> Optional["Variable"]:
        if isinstance(other, Variable):
            if other.builder is not self.builder:
                raise TapeError("operands belong to different tape builders")
            return other
        return None

    def __add__(self, other: Operand) -> "Variable":
        var = self._other(other)
        if var is not None:
            return self.builder.binary(Op.ADD, self, var)
        c = _real(other)
        return self if c == 0.0 else self.builder.unary(Op.ADD_CONST, self, c)

    __radd__ = __add__

    def __sub__(self, other: Operand) -> "Variable":
        var = self._other(other)
        if var is not None:
            return self.builder.binary(Op.SUB, self, var)
        return self + (-_real(other))

    def __rsub__(self, other: Operand) -> "Variable":
        c = _real(other)
        neg = self.builder.unary(Op.NEG, self)
        return neg if c == 0.0 else neg + c

    def __mul__(self, other: Operand) -> "Variable":
        var = self._other(other)
        if var is not None:
            return self.builder.binary(Op.MUL, self, var)
        c = _real(other)
        return self if c == 1.0 else self.builder.unary(Op.SCALE, self, c)

    __rmul__ = __mul__

    def __truediv__(self, other: Operand) -> "Variable":
        var = self._other(other)
        if var is not None:
            return self.builder.binary(Op.DIV, self, var)
        c = _real(other)
        if c == 0.0:
            raise TapeError("division by the constant zero")
        return self * (1.0 / c)

    def __rtruediv__(self, other: Operand) -> "Variable":
        c = _real(other)
        recip = self.builder.unary(Op.POW_CONST, self, -1.0)
        return recip * c

    def __pow__(self, other: Operand) -> "Variable":
        var = self._other(other)
        if var is not None:
            # u ** w == exp(w * ln u)
            return exp(var * log(self))
        p = _real(other)
        if p == 1.0:
            return self
        if p == 2.0:
            return self.builder.unary(Op.SQUARE, self)
        return self.builder.unary(Op.POW_CONST, self, p)

    def __rpow__(self, other: Operand) -> "Variable":
        c = _real(other)
        if c <= 0.0:
            raise TapeError(f"constant base {c!r} must be positive")
        return exp(self * math.log(c))

    def __neg__(self) -> "Variable":
        return self.builder.unary(Op.NEG, self)

    def __pos__(self) -> "Variable":
        return self


def _real(value: Operand) -> float:
    if isinstance(value, numbers.Real):
        return float(value)
    raise TapeError(f"unsupported operand type {type(value).__name__}")


class TapeBuilder:
    """
    Records elementals in creation order.

    Usage:
        builder = TapeBuilder(3)
        x = builder.inputs
        builder.set_output((x[0] + exp(x[1])) * (3 * x[1] + x[2] ** 2))
        tape = builder.finalize()
    """

    def __init__(self, n_inputs: int):
        if n_inputs <= 0:
            raise TapeError("tape needs at least one input")
        self.n = int(n_inputs)
        self._ops: List[Op] = [Op.INPUT] * self.n
        self._preds: List[Tuple[int, ...]] = [()] * self.n
        self._payloads: List[Optional[float]] = [None] * self.n
        self._output: Optional[int] = None
        self.inputs: List[Variable] = [Variable(self, i) for i in range(self.n)]

    def __len__(self) -> int:
        return len(self._ops)

    def _append(self, op: Op, preds: Tuple[int, ...], payload: Optional[float] = None) -> Variable:
        self._ops.append(op)
        self._preds.append(preds)
        self._payloads.append(payload)
        return Variable(self, len(self._ops) - 1)

    def _own(self, var: Variable) -> int:
        if not isinstance(var, Variable) or var.builder is not self:
            raise TapeError("variable does not belong to this tape builder")
        return var.index

    def const(self, c: float) -> Variable:
        return self._append(Op.CONST, (), float(c))

    def unary(self, op: Op, a: Variable, payload: Optional[float] = None) -> Variable:
        if ARITY[op] != 1:
            raise TapeError(f"{op.value} is not a unary elemental")
        if (op in PAYLOAD_OPS) != (payload is not None):
            raise TapeError(f"payload mismatch for {op.value}")
        return self._append(op, (self._own(a),), None if payload is None else float(payload))

    def binary(self, op: Op, a: Variable, b: Variable) -> Variable:
        if ARITY[op] != 2:
            raise TapeError(f"{op.value} is not a binary elemental")
        ia, ib = self._own(a), self._own(b)
        if ia == ib:
            return self._same_operand(op, a)
        return self._append(op, (ia, ib))

    def _same_operand(self, op: Op, a: Variable) -> Variable:
        # phi(v_j, v_j) is rewritten so that no binary has a repeated predecessor
        if op is Op.MUL:
            return self.unary(Op.SQUARE, a)
        if op is Op.ADD:
            return self.unary(Op.SCALE, a, 2.0)
        if op is Op.SUB:
            return self.unary(Op.SCALE, a, 0.0)
        # a / a
        return self.unary(Op.ADD_CONST, self.unary(Op.SCALE, a, 0.0), 1.0)

    def set_output(self, out: Operand) -> None:
        if isinstance(out, Variable):
            self._output = self._own(out)
        else:
            self._output = self.const(_real(out)).index

    def finalize(self) -> Tape:
        """
        Produce a finalized tape whose last node is the output.

        A bare input output is wrapped in Scale(1). Nodes that do not reach
        the output are dropped and the survivors renumbered in creation order.

        Raises:
            TapeError: if no output was designated
        """
        if self._output is None:
            raise TapeError("no output designated")
        ops, preds, payloads = list(self._ops), list(self._preds), list(self._payloads)
        out = self._output
        if out < self.n:
            ops.append(Op.SCALE)
            preds.append((out,))
            payloads.append(1.0)
            out = len(ops) - 1

        live = [False] * (out + 1)
        live[out] = True
        for i in range(out, self.n - 1, -1):
            if live[i]:
                for p in preds[i]:
                    live[p] = True

        new_id: Dict[int, int] = {i: i for i in range(self.n)}
        nodes: List[TapeNode] = [TapeNode(i, Op.INPUT) for i in range(self.n)]
        for i in range(self.n, out + 1):
            if not live[i]:
                continue
            k = len(nodes)
            new_id[i] = k
            nodes.append(TapeNode(k, ops[i], tuple(new_id[p] for p in preds[i]), payloads[i]))
        return Tape(self.n, tuple(nodes)).validate()


def record(program: Callable[[List[Variable]], Operand], n_inputs: int) -> Tape:
    """
    Record a program into a finalized tape.

    Args:
        program: Callable receiving the list of input variables and returning the output
        n_inputs: Number of independent variables

    Returns:
        Finalized (unswept) Tape
    """
    builder = TapeBuilder(n_inputs)
    builder.set_output(program(builder.inputs))
    return builder.finalize()


def _unary_function(op: Op, fallback: Callable[[float], float]) -> Callable[[Operand], Operand]:
    def apply(a: Operand) -> Operand:
        if isinstance(a, Variable):
            return a.builder.unary(op, a)
        return fallback(_real(a))

    apply.__name__ = op.value
    return apply


sin = _unary_function(Op.SIN, math.sin)
cos = _unary_function(Op.COS, math.cos)
exp = _unary_function(Op.EXP, math.exp)
log = _unary_function(Op.LN, math.log)
sqrt = _unary_function(Op.SQRT, math.sqrt)
square = _unary_function(Op.SQUARE, lambda v: v * v)
tanh = _unary_function(Op.TANH, math.tanh)


def total(terms: Iterable[Operand]) -> Operand:
    """Left-to-right sum of terms, one Add node per term after the first."""
    acc: Optional[Operand] = None
    for term in terms:
        acc = term if acc is None else acc + term
    return 0.0 if acc is None else acc


# ---------------------------------------------------------------------------
# Forward sweep
# ---------------------------------------------------------------------------


def forward_sweep(tape: Tape, x: Sequence[float]) -> Tape:
    """
    Evaluate every node at x and record local first and second partials.

    Args:
        tape: Finalized tape (swept or not)
        x: Point of length n

    Returns:
        New Tape with swept=True

    Raises:
        DimensionError: if len(x) != n
        EvaluationError: on a domain violation, carrying the node id
    """
    values = [float(v) for v in x]
    if len(values) != tape.n:
        raise DimensionError(f"point has length {len(values)}, tape expects {tape.n}")
    nodes: List[TapeNode] = []
    for i, v in enumerate(values):
        if not math.isfinite(v):
            raise EvaluationError("non-finite input value", node_id=i, op=Op.INPUT.value)
        nodes.append(TapeNode(i, Op.INPUT, value=v))

    for node in tape.nodes[tape.n:]:
        args = [values[p] for p in node.preds]
        value, d1, d2 = evaluate(node.op, node.payload, args, node.index)
        values.append(value)
        nodes.append(TapeNode(node.index, node.op, node.preds, node.payload, value, d1, d2))
    return Tape(tape.n, tuple(nodes), swept=True)


# ---------------------------------------------------------------------------
# Text serialization
# ---------------------------------------------------------------------------


def dumps(tape: Tape) -> str:
    """
    One node per line: `id op pred0 [pred1] [payload]`, between a header
    comment and a closing `# output <id>` comment.
    """
    lines = [f"{TAPE_HEADER} n={tape.n} nodes={tape.size}"]
    for node in tape.nodes:
        parts = [str(node.index), node.op.value]
        parts.extend(str(p) for p in node.preds)
        if node.payload is not None:
            parts.append(repr(node.payload))
        lines.append(" ".join(parts))
    lines.append(f"{OUTPUT_MARKER} {tape.size - 1}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Tape:
    """
    Parse the output of dumps back into a finalized tape.

    Raises:
        TapeError: on malformed lines
    """
    header: Dict[str, int] = {}
    output: Optional[int] = None
    nodes: List[TapeNode] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(TAPE_HEADER):
                for token in line[len(TAPE_HEADER):].split():
                    key, _, val = token.partition("=")
                    header[key] = _parse_int(val, lineno)
            elif line.startswith(OUTPUT_MARKER):
                output = _parse_int(line[len(OUTPUT_MARKER):].strip(), lineno)
            continue
        fields = line.split()
        if len(fields) < 2:
            raise TapeError(f"line {lineno}: expected `id op ...`")
        index = _parse_int(fields[0], lineno)
        try:
            op = Op(fields[1].lower())
        except ValueError:
            raise TapeError(f"line {lineno}: unknown op {fields[1]!r}") from None
        k = ARITY[op]
        has_payload = op in PAYLOAD_OPS
        if len(fields) != 2 + k + int(has_payload):
            raise TapeError(f"line {lineno}: wrong field count for {op.value}")
        preds = tuple(_parse_int(f, lineno) for f in fields[2:2 + k])
        payload = None
        if has_payload:
            try:
                payload = float(fields[2 + k])
            except ValueError:
                raise TapeError(f"line {lineno}: bad payload {fields[2 + k]!r}") from None
        nodes.append(TapeNode(index, op, preds, payload))

    n = sum(1 for node in nodes if node.op is Op.INPUT)
    if header.get("n", n) != n:
        raise TapeError(f"header declares n={header['n']} but {n} input lines were found")
    if header.get("nodes", len(nodes)) != len(nodes):
        raise TapeError(f"header declares nodes={header['nodes']} but {len(nodes)} node lines were found")
    last = nodes[-1].index if nodes else None
    if output is not None and output != last:
        raise TapeError(f"output marker names node {output} but the last node is {last}")
    return Tape(n, tuple(nodes)).validate()


def _parse_int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise TapeError(f"line {lineno}: expected an integer, got {token!r}") from None
