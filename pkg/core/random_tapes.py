"""
Random tapes over safe domains, for oracle cross-checks.

Every elemental kind can appear. Arguments of ln, sqrt and fractional or
negative powers stay >= DOMAIN_MARGIN, denominators satisfy |b| >= DOMAIN_MARGIN
and every node value stays within VALUE_BOUND at the generated point, so
finite-difference perturbations never leave a domain.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np

from core.elementals import Op, evaluate
from core.errors import EvaluationError
from core.tape import Tape, TapeBuilder

DOMAIN_MARGIN = 0.2
VALUE_BOUND = 50.0
DERIVATIVE_BOUND = 200.0
MAX_RETRIES = 8

BINARY_OPS = (Op.ADD, Op.SUB, Op.MUL, Op.DIV)
UNARY_OPS = (
    Op.NEG, Op.SCALE, Op.ADD_CONST, Op.SIN, Op.COS, Op.EXP,
    Op.LN, Op.SQRT, Op.SQUARE, Op.POW_CONST, Op.TANH,
)
POWERS = (-2.0, -1.0, 0.5, 1.5, 2.0, 3.0)


def random_point(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform point in [0.5, 1.5]^n."""
    return rng.uniform(0.5, 1.5, size=n)


def _payload(rng: np.random.Generator, op: Op) -> Optional[float]:
    if op is Op.SCALE:
        return float(rng.uniform(-2.0, 2.0))
    if op is Op.ADD_CONST:
        return float(rng.uniform(-1.0, 1.0))
    if op is Op.POW_CONST:
        return float(rng.choice(POWERS))
    return None


def _safe(op: Op, payload: Optional[float], args: List[float]) -> bool:
    if op in (Op.LN, Op.SQRT) and args[0] < DOMAIN_MARGIN:
        return False
    if op is Op.POW_CONST and (payload < 0.0 or not payload.is_integer()) and args[0] < DOMAIN_MARGIN:
        return False
    if op is Op.DIV and abs(args[1]) < DOMAIN_MARGIN:
        return False
    if op is Op.EXP and args[0] > 2.0:
        return False
    try:
        value, d1, d2 = evaluate(op, payload, args)
    except EvaluationError:
        return False
    return abs(value) <= VALUE_BOUND and all(abs(d) <= DERIVATIVE_BOUND for d in d1 + d2)


def random_tape(rng: np.random.Generator, max_n: int = 8, max_ell: int = 40) -> Tuple[Tape, np.ndarray]:
    """
    Draw a finalized tape and a point inside every elemental's safe domain.

    Operands are drawn preferring nodes nobody consumes yet, so most of the
    recording survives dead-code elimination. The returned tape has
    n <= max_n and l <= max_ell.
    """
    n = int(rng.integers(1, max_n + 1))
    target = int(rng.integers(1, max_ell + 1))
    x = random_point(rng, n)

    builder = TapeBuilder(n)
    handles = list(builder.inputs)
    values = [float(v) for v in x]
    consumed = [False] * n

    def pick(exclude: int = -1) -> int:
        sinks = [k for k, used in enumerate(consumed) if not used and k != exclude]
        if sinks and rng.random() < 0.7:
            return int(rng.choice(sinks))
        while True:
            k = int(rng.integers(0, len(handles)))
            if k != exclude:
                return k

    while len(handles) - n < target:
        if len(handles) >= 2 and rng.random() < 0.05 and len(handles) - n < target - 1:
            c = float(rng.uniform(0.5, 2.0))
            handles.append(builder.const(c))
            values.append(c)
            consumed.append(False)
            continue

        for _ in range(MAX_RETRIES):
            binary = len(handles) >= 2 and rng.random() < 0.45
            pool = BINARY_OPS if binary else UNARY_OPS
            op = pool[int(rng.integers(len(pool)))]
            a = pick()
            operands = [a, pick(exclude=a)] if binary else [a]
            payload = _payload(rng, op)
            if _safe(op, payload, [values[k] for k in operands]):
                break
        else:
            if len(handles) >= 2:
                op, payload = Op.ADD, None
                a = pick()
                operands = [a, pick(exclude=a)]
            else:
                op, payload, operands = Op.ADD_CONST, 1.0, [0]

        args = [values[k] for k in operands]
        value, _, _ = evaluate(op, payload, args)
        if len(operands) == 2:
            handle = builder.binary(op, handles[operands[0]], handles[operands[1]])
        else:
            handle = builder.unary(op, handles[operands[0]], payload)
        for k in operands:
            consumed[k] = True
        handles.append(handle)
        values.append(value)
        consumed.append(False)

    builder.set_output(handles[-1])
    return builder.finalize(), x


def random_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.normal(size=n)
