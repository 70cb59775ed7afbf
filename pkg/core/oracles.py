"""
Reference Hessians for verification.

- dense_hessian_nested: full (n+l) x (n+l) state-transformation matrices,
  W <- Phi_i'^T W Phi_i' + vbar_i Phi_i'' swept backward, no sparsity used
- fd_hessian / fd_gradient: central differences with Richardson step halving
- hessian_vector_product: forward tangents followed by a second-order
  reverse sweep

The path-enumeration oracle lives in core.graph_model.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence, Union

import numpy as np

from core.config import get_config
from core.edge_pushing import SparseHessian
from core.errors import CapacityError, DimensionError, InvariantViolation
from core.reverse_gradient import reverse_gradient
from core.tape import Tape, forward_sweep, require_swept

# position of d2_{ab} in a binary node's (00, 01, 11) tuple
_D2_INDEX = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}

SYMMETRY_TOL = 1e-12


def state_jacobian(tape: Tape, i: int) -> np.ndarray:
    """Phi_i': identity with row i replaced by the partials of phi_i."""
    node = tape.nodes[i]
    jac = np.eye(tape.size)
    jac[i, :] = 0.0
    for p, c in zip(node.preds, node.d1):
        jac[i, p] = c
    return jac


def local_hessian(tape: Tape, i: int) -> np.ndarray:
    """phi_i'' embedded as a dense (n+l) x (n+l) symmetric matrix."""
    node = tape.nodes[i]
    hess = np.zeros((tape.size, tape.size))
    for a, pa in enumerate(node.preds):
        for b, pb in enumerate(node.preds):
            hess[pa, pb] = node.d2[0] if len(node.preds) == 1 else node.d2[_D2_INDEX[a, b]]
    return hess


def dense_hessian_nested(tape: Tape, cap: Optional[int] = None) -> SparseHessian:
    """
    Hessian by the nested dense recurrence.

    Args:
        tape: Swept tape
        cap: Largest n + l accepted (None = config dense_cap)

    Raises:
        StateError: if the tape has not been swept
        CapacityError: if n + l exceeds the cap
        InvariantViolation: if W loses symmetry or block support
    """
    require_swept(tape)
    if cap is None:
        cap = get_config().get_dense_cap()
    size = tape.size
    if size > cap:
        raise CapacityError(f"dense oracle limited to n + l <= {cap}, tape has {size} nodes")

    w = np.zeros((size, size))
    vbar = np.zeros(size)
    vbar[-1] = 1.0
    for i in range(size - 1, tape.n - 1, -1):
        jac = state_jacobian(tape, i)
        vi = vbar[i]
        w = jac.T @ w @ jac + vi * local_hessian(tape, i)
        vbar = vbar @ jac

        if np.any(w[i:, :]) or np.any(w[:, i:]):
            raise InvariantViolation("dense W has support outside the leading block", node_id=i)
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.max(np.abs(w - w.T)) > SYMMETRY_TOL * scale:
            raise InvariantViolation("dense W is not symmetric", node_id=i)
        w = 0.5 * (w + w.T)

    n = tape.n
    return SparseHessian.from_dense(w[:n, :n])


def _extrapolated_difference(
    difference: Callable[[float], np.ndarray], h: float, levels: int
) -> np.ndarray:
    """
    Richardson tableau over central differences at h, h/2, ..., h/2^(levels-1).

    difference(h) must return (F(x + h e_k) - F(x - h e_k)) / 2h, whose error
    expands in even powers of h; each column of the tableau removes one more.
    """
    previous = [difference(h)]
    for level in range(1, levels):
        h *= 0.5
        row = [difference(h)]
        factor = 1.0
        for j in range(level):
            factor *= 4.0
            row.append((factor * row[j] - previous[j]) / (factor - 1.0))
        previous = row
    return previous[-1]


def _check_point(tape: Tape, x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (tape.n,):
        raise DimensionError(f"point has shape {x.shape}, tape expects ({tape.n},)")
    return x


def fd_gradient(
    tape: Tape,
    x: Sequence[float],
    step: Optional[float] = None,
    levels: Optional[int] = None,
) -> np.ndarray:
    """Extrapolated central-difference gradient from function values."""
    config = get_config()
    step = config.get_fd_step() if step is None else step
    levels = config.get_fd_levels() if levels is None else levels
    x = _check_point(tape, x)

    def value_difference(k: int) -> Callable[[float], np.ndarray]:
        def difference(h: float) -> np.ndarray:
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            fp = forward_sweep(tape, xp).function_value
            fm = forward_sweep(tape, xm).function_value
            return np.array((fp - fm) / (2.0 * h))

        return difference

    grad = np.zeros(tape.n)
    for k in range(tape.n):
        grad[k] = _extrapolated_difference(value_difference(k), step * max(1.0, abs(x[k])), levels)
    return grad


def fd_hessian_dense(
    tape: Tape,
    x: Sequence[float],
    step: Optional[float] = None,
    levels: Optional[int] = None,
) -> np.ndarray:
    """Symmetrized extrapolated central differences of the reverse gradient."""
    config = get_config()
    step = config.get_fd_step() if step is None else step
    levels = config.get_fd_levels() if levels is None else levels
    x = _check_point(tape, x)

    def gradient_difference(k: int) -> Callable[[float], np.ndarray]:
        def difference(h: float) -> np.ndarray:
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            gp = reverse_gradient(forward_sweep(tape, xp)).gradient
            gm = reverse_gradient(forward_sweep(tape, xm)).gradient
            return (gp - gm) / (2.0 * h)

        return difference

    hess = np.zeros((tape.n, tape.n))
    for k in range(tape.n):
        hess[:, k] = _extrapolated_difference(gradient_difference(k), step * max(1.0, abs(x[k])), levels)
    return 0.5 * (hess + hess.T)


def fd_hessian(
    tape: Tape,
    x: Sequence[float],
    step: Optional[float] = None,
    threshold: Optional[float] = None,
    levels: Optional[int] = None,
) -> SparseHessian:
    """
    Finite-difference Hessian with small entries removed.

    Entries with |h| <= threshold * max(1, max|H|) are dropped.

    Raises:
        EvaluationError: if a perturbed point leaves an elemental domain
    """
    if threshold is None:
        threshold = get_config().get_fd_threshold()
    hess = fd_hessian_dense(tape, x, step, levels)
    scale = max(1.0, float(np.max(np.abs(hess)))) if hess.size else 1.0
    return SparseHessian.from_dense(hess, threshold * scale)


def hessian_vector_product(tape: Tape, d: Sequence[float]) -> np.ndarray:
    """
    f''(x) d without differencing.

    Raises:
        StateError: if the tape has not been swept
        DimensionError: if len(d) != n
    """
    require_swept(tape)
    d = np.asarray(d, dtype=float)
    if d.shape != (tape.n,):
        raise DimensionError(f"direction has shape {d.shape}, tape expects ({tape.n},)")

    size, nodes = tape.size, tape.nodes
    vdot = [0.0] * size
    vdot[: tape.n] = d.tolist()
    for node in nodes[tape.n:]:
        vdot[node.index] = sum(c * vdot[p] for p, c in zip(node.preds, node.d1))

    vbar = [0.0] * size
    vbar_dot = [0.0] * size
    vbar[-1] = 1.0
    for i in range(size - 1, tape.n - 1, -1):
        node = nodes[i]
        vi, vdi = vbar[i], vbar_dot[i]
        unary = len(node.preds) == 1
        for a, (p, c) in enumerate(zip(node.preds, node.d1)):
            vbar[p] += vi * c
            curvature = 0.0
            for b, q in enumerate(node.preds):
                d2 = node.d2[0] if unary else node.d2[_D2_INDEX[a, b]]
                curvature += d2 * vdot[q]
            vbar_dot[p] += vdi * c + vi * curvature
    return np.array(vbar_dot[: tape.n])


def relative_discrepancy(
    candidate: Union[SparseHessian, np.ndarray, Sequence[float]],
    reference: Union[SparseHessian, np.ndarray, Sequence[float]],
) -> float:
    """max|A - B| / max(1, max|B|)."""
    a = candidate.to_dense() if isinstance(candidate, SparseHessian) else np.asarray(candidate, dtype=float)
    b = reference.to_dense() if isinstance(reference, SparseHessian) else np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare shapes {a.shape} and {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))
