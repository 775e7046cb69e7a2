import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarspike.errors import QuantParamsError
from polarspike.layers import Pqa
from polarspike.quant import (QuantParams, lattice_index, pqa_backward_ste, pqa_forward,
                              qa_forward)
from polarspike.tensor import as_tensor

Q = QuantParams(levels=8, theta=8.0, alpha=-0.25, beta=1.0)


def test_pqa_forward():
    y = pqa_forward(Q, as_tensor([3.4, 0, -3.4, 20]))

    assert y.dtype == np.float32
    np.testing.assert_array_equal(y, [3, 0, -2, 8])


def test_pqa_rounds_half_up():
    q = QuantParams(levels=4, theta=4.0, alpha=-1 + 1 / 4, beta=1.0)

    np.testing.assert_array_equal(pqa_forward(q, as_tensor([0.5, 1.5, -0.5, -1.5])),
                                  [1, 2, 0, -1])


def test_qa_forward():
    np.testing.assert_array_equal(qa_forward(Q, as_tensor([3.4, -3.4, 100])), [3, 0, 8])


@pytest.mark.parametrize('kwargs, constraint', [
    (dict(levels=0, theta=1.0, alpha=0.0, beta=1.0), 'levels_positive'),
    (dict(levels=2.0, theta=1.0, alpha=0.0, beta=1.0), 'levels_integer'),
    (dict(levels=4, theta=0.0, alpha=0.0, beta=1.0), 'theta_positive'),
    (dict(levels=4, theta=-1.0, alpha=0.0, beta=1.0), 'theta_positive'),
    (dict(levels=4, theta=1.0, alpha=-1.0, beta=1.0), 'alpha_range'),
    (dict(levels=4, theta=1.0, alpha=0.25, beta=1.0), 'alpha_range'),
    (dict(levels=4, theta=1.0, alpha=0.0, beta=0.0), 'beta_range'),
    (dict(levels=4, theta=1.0, alpha=0.0, beta=1.25), 'beta_range'),
    (dict(levels=4, theta=1.0, alpha=-0.3, beta=1.0), 'alpha_integral'),
    (dict(levels=4, theta=1.0, alpha=0.0, beta=0.6), 'beta_integral'),
])
def test_invalid_params(kwargs, constraint):
    q = QuantParams(**kwargs)

    with pytest.raises(QuantParamsError) as excinfo:
        q.validate()
    assert excinfo.value.constraint == constraint


def test_pqa_layer_checks_params_when_built():
    with pytest.raises(QuantParamsError) as excinfo:
        Pqa(QuantParams(levels=4, theta=1.0, alpha=0.0, beta=0.6))
    assert excinfo.value.constraint == "beta_integral"

    layer = Pqa(Q)
    np.testing.assert_array_equal(layer.forward(as_tensor([3.4])), [3])


def test_closed_alpha_allows_minus_one():
    q = QuantParams(levels=4, theta=1.0, alpha=-1.0, beta=1.0)

    q.validate(closed_alpha=True)
    with pytest.raises(QuantParamsError):
        q.validate()


def test_ste_inside_range():
    grad_x, grad_theta = pqa_backward_ste(Q, as_tensor([3.4]), as_tensor([1.0]))

    np.testing.assert_array_equal(grad_x, [1])
    assert grad_theta == 0


def test_ste_saturated_above():
    grad_x, grad_theta = pqa_backward_ste(Q, as_tensor([20]), as_tensor([1.0]))

    np.testing.assert_array_equal(grad_x, [0])
    assert grad_theta == 1


def test_ste_saturated_below():
    grad_x, grad_theta = pqa_backward_ste(Q, as_tensor([-5]), as_tensor([2.0]))

    np.testing.assert_array_equal(grad_x, [0])
    assert grad_theta == pytest.approx(-0.5)


def test_ste_sums_theta_contributions():
    x = as_tensor([3.4, 20, -5, 30])
    up = as_tensor([1, 1, 2, 3])

    grad_x, grad_theta = pqa_backward_ste(Q, x, up)

    np.testing.assert_array_equal(grad_x, [1, 0, 0, 0])
    assert grad_theta == pytest.approx(1 - 0.5 + 3)


def test_ste_shape_mismatch():
    with pytest.raises(ValueError):
        pqa_backward_ste(Q, as_tensor([1, 2]), as_tensor([1]))


@st.composite
def quant_params(draw):
    levels = draw(st.integers(1, 16))
    k_neg = draw(st.integers(-(levels - 1), 0))
    k_pos = draw(st.integers(1, levels))
    theta = draw(st.floats(1e-3, 100))
    return QuantParams(levels, theta, k_neg / levels, k_pos / levels)


@settings(max_examples=200, deadline=None)
@given(quant_params(), st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
def test_pqa_output_on_lattice(q, values):
    x = as_tensor(values)

    k = lattice_index(q, x)
    y = pqa_forward(q, x)

    assert np.all(k == np.round(k))
    assert np.all((k >= q.k_neg) & (k <= q.k_pos))
    np.testing.assert_array_equal(y, (k * q.step).astype(np.float32))
    assert np.all(y >= np.float32(q.alpha * q.theta) - 1e-4 * q.theta)
    assert np.all(y <= np.float32(q.beta * q.theta) + 1e-4 * q.theta)


@settings(max_examples=100, deadline=None)
@given(quant_params(), st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20))
def test_pqa_is_monotone(q, values):
    x = np.sort(as_tensor(values))

    assert np.all(np.diff(lattice_index(q, x)) >= 0)


@settings(max_examples=100, deadline=None)
@given(quant_params(), st.floats(-1e3, 1e3))
def test_pqa_is_idempotent(q, value):
    y = pqa_forward(q, as_tensor([value]))

    np.testing.assert_array_equal(pqa_forward(q, y), y)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(1, 16),
    st.floats(0.1, 20),
    st.lists(st.floats(-40, 40, allow_nan=False), min_size=1, max_size=20),
)
def test_qa_is_pqa_shifted_by_half_a_step(levels, theta, values):
    q = QuantParams(levels, theta, 0.0, 1.0)
    x = np.asarray(values, dtype=np.float64)

    qa = qa_forward(q, x + q.step / 2)
    pqa = pqa_forward(q, x)

    np.testing.assert_array_equal(qa, pqa)
    # Without the shift QA floors where PQA rounds: never above it, at most one step below.
    unshifted = qa_forward(q, x)
    assert np.all(unshifted <= pqa)
    assert np.all(pqa - unshifted <= q.step + 1e-5)
