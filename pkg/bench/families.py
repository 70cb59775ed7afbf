"""
Scalable test functions with provable Hessian sparsity patterns.

Each builder records a program over the input variables; each *_nnz
function gives the exact lower-triangle count of its structural pattern.
Indices are 0-based.
"""

from __future__ import annotations

from typing import Callable, Dict, Iterator, List, Set, Tuple

from core.tape import Variable, cos, exp, sin, total

Program = Callable[..., Variable]

LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
LCG_MASK = (1 << 64) - 1


class Lcg:
    """64-bit linear congruential generator; indices come from the high bits."""

    def __init__(self, seed: int):
        self.state = seed & LCG_MASK

    def next(self) -> int:
        self.state = (LCG_MULTIPLIER * self.state + LCG_INCREMENT) & LCG_MASK
        return self.state

    def index(self, n: int) -> int:
        return (self.next() >> 33) % n


def irregular_pairs(n: int, seed: int, pairs_per_variable: int = 2) -> Iterator[Tuple[int, int]]:
    lcg = Lcg(seed)
    for _ in range(pairs_per_variable * n):
        i = lcg.index(n)
        j = lcg.index(n)
        yield i, j


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def band1(x: List[Variable]) -> Variable:
    return total(cos(x[i] * x[i + 1]) for i in range(len(x) - 1))


def band2(x: List[Variable]) -> Variable:
    n = len(x)
    return band1(x) + total(x[i] * x[i + 2] for i in range(n - 2))


def band5(x: List[Variable]) -> Variable:
    n = len(x)
    window = (
        (x[i] * x[i + 5] + x[i + 1] + x[i + 2] + x[i + 3] + x[i + 4]) ** 2
        for i in range(n - 5)
    )
    return total(window) + total(sin(v) for v in x)


def arrow(x: List[Variable]) -> Variable:
    last = x[-1]
    return total(x[i] ** 2 + last * x[i] for i in range(len(x) - 1)) + exp(last)


def frame_diag(x: List[Variable]) -> Variable:
    n = len(x)
    first, last = x[0], x[-1]
    frame = total(sin(first * x[i]) for i in range(1, n))
    edge = total(x[i] ** 2 * last for i in range(1, n - 1))
    return frame + edge + total(v ** 4 for v in x)


def block_diag(x: List[Variable], block: int = 5) -> Variable:
    terms = []
    for start in range(0, len(x), block):
        prod = x[start]
        for v in x[start + 1:start + block]:
            prod = prod * v
        terms.append(prod ** 2)
    return total(terms)


def irregular(x: List[Variable], seed: int, pairs_per_variable: int = 2) -> Variable:
    return total(
        x[i] * x[j] * sin(x[i] + x[j])
        for i, j in irregular_pairs(len(x), seed, pairs_per_variable)
    )


def arrow_band1(x: List[Variable]) -> Variable:
    last = x[-1]
    return band1(x) + total(x[i] * last for i in range(len(x) - 2))


def arrow_band3(x: List[Variable]) -> Variable:
    n = len(x)
    last = x[-1]
    band = total((x[i] + x[i + 1] + x[i + 2] + x[i + 3]) ** 2 for i in range(n - 3))
    return band + total(x[i] * last for i in range(n - 4))


def linear(x: List[Variable]) -> Variable:
    return total(3 * v for v in x)


# ---------------------------------------------------------------------------
# Closed-form lower-triangle nonzero counts
# ---------------------------------------------------------------------------


def band_nnz(n: int, bandwidth: int) -> int:
    return sum(n - d for d in range(bandwidth + 1))


def block_diag_nnz(n: int, block: int = 5) -> int:
    q, r = divmod(n, block)
    return q * block * (block + 1) // 2 + r * (r + 1) // 2


def irregular_pattern(n: int, seed: int, pairs_per_variable: int = 2) -> Set[Tuple[int, int]]:
    pattern: Set[Tuple[int, int]] = set()
    for i, j in irregular_pairs(n, seed, pairs_per_variable):
        pattern.update({(i, i), (j, j), (max(i, j), min(i, j))})
    return pattern


def irregular_nnz(n: int, seed: int, pairs_per_variable: int = 2) -> int:
    return len(irregular_pattern(n, seed, pairs_per_variable))


BUILDERS: Dict[str, Program] = {
    "band1": band1,
    "band2": band2,
    "band5": band5,
    "arrow": arrow,
    "frame_diag": frame_diag,
    "block_diag": block_diag,
    "irregular": irregular,
    "arrow_band1": arrow_band1,
    "arrow_band3": arrow_band3,
    "linear": linear,
}

NNZ: Dict[str, Callable[..., int]] = {
    "band1": lambda n: band_nnz(n, 1),
    "band2": lambda n: band_nnz(n, 2),
    "band5": lambda n: band_nnz(n, 5),
    "arrow": lambda n: 2 * n - 1,
    "frame_diag": lambda n: 3 * n - 3,
    "block_diag": block_diag_nnz,
    "irregular": irregular_nnz,
    "arrow_band1": lambda n: 3 * n - 3,
    "arrow_band3": lambda n: band_nnz(n, 3) + n - 4,
    "linear": lambda n: 0,
}
