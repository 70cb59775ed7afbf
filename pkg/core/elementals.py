"""
Elemental function library.

Each OpCode maps to a closed-form evaluator returning the node value, the
first partials with respect to each predecessor, and the second partials over
unordered predecessor pairs. Second partials of a binary op are stored as
(d2_00, d2_01, d2_11); a unary op stores a single d2_00.

Structural flags describe which of those partials can be nonzero for some
input. They drive the boolean sweep of the structural pattern and decide
whether a numerically zero contribution is still inserted as an edge.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Optional, Sequence, Tuple

from core.errors import EvaluationError


class Op(str, Enum):
    """Elemental operation codes. Values are the names used in tape text."""

    INPUT = "input"
    CONST = "const"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    NEG = "neg"
    SCALE = "scale"
    ADD_CONST = "addconst"
    SIN = "sin"
    COS = "cos"
    EXP = "exp"
    LN = "ln"
    SQRT = "sqrt"
    SQUARE = "square"
    POW_CONST = "powconst"
    TANH = "tanh"


ARITY = {
    Op.INPUT: 0,
    Op.CONST: 0,
    Op.ADD: 2,
    Op.SUB: 2,
    Op.MUL: 2,
    Op.DIV: 2,
    Op.NEG: 1,
    Op.SCALE: 1,
    Op.ADD_CONST: 1,
    Op.SIN: 1,
    Op.COS: 1,
    Op.EXP: 1,
    Op.LN: 1,
    Op.SQRT: 1,
    Op.SQUARE: 1,
    Op.POW_CONST: 1,
    Op.TANH: 1,
}

# Ops whose payload is a real constant
PAYLOAD_OPS = frozenset({Op.CONST, Op.SCALE, Op.ADD_CONST, Op.POW_CONST})

LINEAR_OPS = frozenset({Op.INPUT, Op.CONST, Op.ADD, Op.SUB, Op.NEG, Op.SCALE, Op.ADD_CONST})

Partials = Tuple[float, Tuple[float, ...], Tuple[float, ...]]


def arity(op: Op) -> int:
    return ARITY[op]


def is_linear(op: Op, payload: Optional[float] = None) -> bool:
    """True when the op has identically zero second partials."""
    if op in LINEAR_OPS:
        return True
    if op is Op.POW_CONST:
        return payload in (0.0, 1.0)
    return False


def structural_d1(op: Op, payload: Optional[float] = None) -> Tuple[bool, ...]:
    """Which first partials can be nonzero."""
    n = ARITY[op]
    if n == 0:
        return ()
    if op is Op.SCALE:
        return (payload != 0.0,)
    if op is Op.POW_CONST:
        return (payload != 0.0,)
    return (True,) * n


def structural_d2(op: Op, payload: Optional[float] = None) -> Tuple[bool, ...]:
    """Which second partials, in (00[, 01, 11]) order, can be nonzero."""
    if op is Op.MUL:
        return (False, True, False)
    if op is Op.DIV:
        return (False, True, True)
    n = ARITY[op]
    if n == 2:
        return (False, False, False)
    if n == 1:
        return (not is_linear(op, payload),)
    return ()


def _domain_error(message: str, node_id: Optional[int], op: Op) -> EvaluationError:
    return EvaluationError(message, node_id=node_id, op=op.value)


def evaluate(
    op: Op,
    payload: Optional[float],
    args: Sequence[float],
    node_id: Optional[int] = None,
) -> Partials:
    """
    Evaluate one elemental.

    Args:
        op: Operation code
        payload: Constant carried by Const/Scale/AddConst/PowConst
        args: Predecessor values in predecessor order
        node_id: Used only to tag domain errors

    Returns:
        (value, d1, d2) with d1/d2 sized by arity

    Raises:
        EvaluationError: on a domain violation or a non-finite result
    """
    if op is Op.ADD:
        a, b = args
        result = (a + b, (1.0, 1.0), (0.0, 0.0, 0.0))
    elif op is Op.SUB:
        a, b = args
        result = (a - b, (1.0, -1.0), (0.0, 0.0, 0.0))
    elif op is Op.MUL:
        a, b = args
        result = (a * b, (b, a), (0.0, 1.0, 0.0))
    elif op is Op.DIV:
        a, b = args
        if b == 0.0:
            raise _domain_error("division by zero", node_id, op)
        inv = 1.0 / b
        result = (a * inv, (inv, -a * inv * inv), (0.0, -inv * inv, 2.0 * a * inv * inv * inv))
    elif op is Op.NEG:
        result = (-args[0], (-1.0,), (0.0,))
    elif op is Op.SCALE:
        result = (payload * args[0], (payload,), (0.0,))
    elif op is Op.ADD_CONST:
        result = (args[0] + payload, (1.0,), (0.0,))
    elif op is Op.SIN:
        s, c = math.sin(args[0]), math.cos(args[0])
        result = (s, (c,), (-s,))
    elif op is Op.COS:
        s, c = math.sin(args[0]), math.cos(args[0])
        result = (c, (-s,), (-c,))
    elif op is Op.EXP:
        try:
            e = math.exp(args[0])
        except OverflowError:
            raise _domain_error("exp overflow", node_id, op) from None
        result = (e, (e,), (e,))
    elif op is Op.LN:
        v = args[0]
        if v <= 0.0:
            raise _domain_error(f"log of non-positive value {v!r}", node_id, op)
        inv = 1.0 / v
        result = (math.log(v), (inv,), (-inv * inv,))
    elif op is Op.SQRT:
        v = args[0]
        if v <= 0.0:
            # sqrt'(0) is unbounded, so zero is rejected along with negatives
            raise _domain_error(f"sqrt of non-positive value {v!r}", node_id, op)
        s = math.sqrt(v)
        result = (s, (0.5 / s,), (-0.25 / (s * v),))
    elif op is Op.SQUARE:
        v = args[0]
        result = (v * v, (2.0 * v,), (2.0,))
    elif op is Op.POW_CONST:
        result = _pow_const(args[0], payload, node_id)
    elif op is Op.TANH:
        t = math.tanh(args[0])
        g = 1.0 - t * t
        result = (t, (g,), (-2.0 * t * g,))
    elif op is Op.CONST:
        result = (payload, (), ())
    else:
        raise _domain_error(f"op {op.value} cannot be evaluated from predecessors", node_id, op)

    value, d1, d2 = result
    if not math.isfinite(value) or not all(map(math.isfinite, d1)) or not all(map(math.isfinite, d2)):
        raise _domain_error("non-finite value or derivative", node_id, op)
    return result


def _pow_const(v: float, p: float, node_id: Optional[int]) -> Partials:
    if p == 0.0:
        return 1.0, (0.0,), (0.0,)
    if p == 1.0:
        return v, (1.0,), (0.0,)
    if float(p).is_integer():
        if p < 0.0 and v == 0.0:
            raise _domain_error("negative power of zero", node_id, Op.POW_CONST)
    elif v <= 0.0:
        raise _domain_error(f"fractional power of non-positive value {v!r}", node_id, Op.POW_CONST)
    try:
        value = v ** p
        d1 = p * v ** (p - 1.0)
        d2 = p * (p - 1.0) * v ** (p - 2.0)
    except (OverflowError, ZeroDivisionError):
        raise _domain_error("power overflow", node_id, Op.POW_CONST) from None
    return value, (d1,), (d2,)
