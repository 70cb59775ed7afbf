"""
Tests for the reverse gradient sweep.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import StateError
from core.graph_model import path_weight_sums
from core.oracles import fd_gradient, relative_discrepancy
from core.random_tapes import random_tape
from core.reverse_gradient import AdjointVector, reverse_gradient
from core.tape import forward_sweep, record

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_product_sum_gradient(product_sum_tape):
    grad, adjoints = reverse_gradient(forward_sweep(product_sum_tape, [1.0, 2.0]))
    np.testing.assert_array_equal(grad, [8.0, 5.0])
    # v2 = x0 x1 is weighted by v3 = x0 + x1 and vice versa
    assert adjoints.vbar == [8.0, 5.0, 3.0, 2.0, 1.0]


def test_worked_example_gradient(worked_tape):
    grad, _ = reverse_gradient(forward_sweep(worked_tape, [1.0, 0.0, 2.0]))
    # (3 x1 + x2^2, e^x1 (3 x1 + x2^2) + 3 (x0 + e^x1), 2 x2 (x0 + e^x1))
    np.testing.assert_allclose(grad, [4.0, 10.0, 8.0], rtol=1e-15)


def test_linear_gradient():
    tape = record(lambda x: 3 * x[0] + x[1] - 7, 2)
    grad, adjoints = reverse_gradient(forward_sweep(tape, [5.0, -2.0]))
    np.testing.assert_array_equal(grad, [3.0, 1.0])
    assert adjoints.visits == tape.ell
    assert adjoints.multiply_adds == sum(len(node.preds) for node in tape.nodes)


def test_requires_forward_sweep(worked_tape):
    with pytest.raises(StateError):
        reverse_gradient(worked_tape)


def test_seeded_adjoints():
    adj = AdjointVector.seeded(4)
    assert list(adj) == [0.0, 0.0, 0.0, 1.0]
    assert len(adj) == 4
    np.testing.assert_array_equal(adj.as_array(), [0.0, 0.0, 0.0, 1.0])


def test_result_unpacks_and_names_fields(product_sum_tape):
    result = reverse_gradient(forward_sweep(product_sum_tape, [1.0, 2.0]))
    grad, adjoints = result
    assert result.gradient is grad and result.adjoints is adjoints


@settings(max_examples=1000, deadline=None)
@given(seeds)
def test_gradient_matches_finite_differences(seed):
    tape, x = random_tape(np.random.default_rng(seed), max_n=8, max_ell=40)
    grad, _ = reverse_gradient(forward_sweep(tape, x))
    assert relative_discrepancy(grad, fd_gradient(tape, x)) <= 1e-5


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_adjoints_equal_path_weight_sums(seed):
    tape, x = random_tape(np.random.default_rng(seed), max_n=4, max_ell=18)
    swept = forward_sweep(tape, x)
    _, adjoints = reverse_gradient(swept)
    sums = path_weight_sums(swept)
    assert relative_discrepancy(sums, adjoints.as_array()) <= 1e-12
