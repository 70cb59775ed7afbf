"""
Reverse gradient computation (componentwise backward sweep).

Right before node i is swept, vbar[i] holds the sum over all paths from i to
the output of the product of arc weights c^k_j; at termination vbar[i] equals
df/dv_i for every node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, NamedTuple

import numpy as np

from core.tape import Tape, require_swept


@dataclass
class AdjointVector:
    """
    Adjoints over all n + l nodes plus the work counters of the sweep.

    Attributes:
        vbar: Adjoint per node id
        visits: Nodes swept
        multiply_adds: vbar[j] += vbar[i] * c_j updates performed
    """

    vbar: List[float]
    visits: int = 0
    multiply_adds: int = 0

    @classmethod
    def seeded(cls, size: int) -> "AdjointVector":
        vbar = [0.0] * size
        vbar[-1] = 1.0
        return cls(vbar)

    def __len__(self) -> int:
        return len(self.vbar)

    def __getitem__(self, i: int) -> float:
        return self.vbar[i]

    def __iter__(self) -> Iterator[float]:
        return iter(self.vbar)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vbar, dtype=float)


class GradientResult(NamedTuple):
    gradient: np.ndarray
    adjoints: AdjointVector


def reverse_gradient(tape: Tape) -> GradientResult:
    """
    Compute the gradient of a swept tape.

    The component vbar[i] is not zeroed after node i distributes its adjoint;
    later iterations never read it, and the full vector is returned because
    the Hessian sweeps and the graph model need the intermediate adjoints.

    Raises:
        StateError: if the tape has not been swept
    """
    require_swept(tape)
    adj = AdjointVector.seeded(tape.size)
    vbar = adj.vbar
    nodes = tape.nodes
    visits = madds = 0
    for i in range(tape.size - 1, tape.n - 1, -1):
        node = nodes[i]
        visits += 1
        vi = vbar[i]
        # pred0 then pred1 for reproducible rounding
        for p, c in zip(node.preds, node.d1):
            vbar[p] += vi * c
            madds += 1
    adj.visits = visits
    adj.multiply_adds = madds
    return GradientResult(np.array(vbar[: tape.n], dtype=float), adj)
