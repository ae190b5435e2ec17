import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from alignlab import tensor as T
from alignlab.errors import DimensionError, NonFiniteError, UsageError
from alignlab.optim import Adam, AdamState, adam_step, inverse_sqrt_lr
from alignlab.tensor import Tensor

from _gradcheck import OPS, check_graph, make_program


# ---------------------------------------------------------------- matmul

def test_matmul_identity():
    B = np.arange(6, dtype=np.float32).reshape(2, 3)
    assert np.array_equal(T.matmul(Tensor(np.eye(2)), Tensor(B)).data, B)


def test_matmul_hand_example():
    out = T.matmul(Tensor([[1, 2], [3, 4]]), Tensor([[1], [1]]))
    assert out.data.tolist() == [[3], [7]]


def test_matmul_zeros():
    out = T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.ones((3, 4))))
    assert not out.data.any()


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


# ---------------------------------------------------------------- softmax

def test_softmax_examples():
    assert np.allclose(T.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])
    assert np.allclose(T.softmax(Tensor([math.log(1), math.log(3)])).data, [0.25, 0.75])
    big = T.softmax(Tensor([1000.0, 0.0])).data
    assert np.isfinite(big).all() and big[0] == pytest.approx(1.0) and big[1] == pytest.approx(0.0)


def test_softmax_empty_axis():
    with pytest.raises(DimensionError):
        T.softmax(Tensor(np.zeros((2, 0))))


def test_softmax_bad_axis():
    with pytest.raises(DimensionError):
        T.softmax(Tensor(np.zeros((2, 3))), axis=2)


@given(arrays(np.float32, st.tuples(st.integers(1, 5), st.integers(1, 7)),
              elements=st.floats(-50, 50, width=32)), st.randoms(use_true_random=False))
def test_softmax_rows_sum_to_one_and_permute(x, rnd):
    out = T.softmax(Tensor(x)).data
    assert (out >= 0).all()
    assert np.allclose(out.sum(axis=-1), 1.0, atol=1e-6)
    perm = list(range(x.shape[1]))
    rnd.shuffle(perm)
    assert np.allclose(T.softmax(Tensor(x[:, perm])).data, out[:, perm], atol=1e-7)


# ---------------------------------------------------------------- cross entropy

def test_cross_entropy_uniform():
    loss = T.cross_entropy(Tensor(np.zeros((3, 7))), [0, 4, 6])
    assert loss.item() == pytest.approx(math.log(7), rel=1e-6)


def test_cross_entropy_margin_limit():
    values = []
    for margin in (1.0, 5.0, 20.0):
        logits = np.zeros((1, 4))
        logits[0, 2] = margin
        values.append(T.cross_entropy(Tensor(logits), [2]).item())
    assert values[0] > values[1] > values[2] and values[2] < 1e-6


def test_cross_entropy_hand_example():
    loss = T.cross_entropy(Tensor([[math.log(3), math.log(1)]]), [0])
    assert loss.item() == pytest.approx(math.log(4 / 3), abs=1e-6)
    assert loss.item() == pytest.approx(0.2877, abs=1e-4)


def test_cross_entropy_label_smoothing_closed_form():
    logits = np.array([[math.log(3), 0.0]])
    logp = np.log(np.array([0.75, 0.25]))
    expected = -(0.9 * logp[0] + 0.1 * logp.mean())
    assert T.cross_entropy(Tensor(logits), [0], 0.1).item() == pytest.approx(expected, rel=1e-6)


def test_cross_entropy_ignore_index_and_errors():
    logits = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
    full = T.cross_entropy(Tensor(logits.data[:2]), [1, 2]).item()
    assert T.cross_entropy(logits, [1, 2, 0], ignore_index=0).item() == pytest.approx(full, rel=1e-6)
    with pytest.raises(IndexError):
        T.cross_entropy(logits, [1, 2, 4])
    with pytest.raises(IndexError):
        T.cross_entropy(logits, [1, -1, 2])


# ---------------------------------------------------------------- backward

def test_backward_square():
    x = Tensor(3.0, requires_grad=True)
    T.backward(x * x)
    assert x.grad == pytest.approx(6.0)


def test_backward_accumulates():
    x = Tensor(3.0, requires_grad=True)
    T.backward(x * x)
    T.backward(x * x)
    assert x.grad == pytest.approx(12.0)


def test_backward_independent_leaf_gets_zero():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = Tensor([3.0], requires_grad=True)
    T.backward((x * x).sum() + y.sum() * 0.0)
    assert np.array_equal(y.grad, [0.0])


def test_backward_needs_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(UsageError):
        T.backward(x * x)


def test_softmax_cross_entropy_composite_matches_differences():
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=(4, 5))
    w = rng.normal(size=(5, 5))
    targets = [0, 3, 2, 4]

    def f(x, grad=False):
        xt = Tensor(x, requires_grad=grad, dtype=np.float64)
        h = T.softmax(T.matmul(xt, Tensor(w, dtype=np.float64)), axis=-1)
        return xt, T.cross_entropy(h * 3.0, targets, 0.1)

    xt, loss = f(x0, True)
    T.backward(loss)
    num = np.zeros_like(x0)
    for idx in np.ndindex(x0.shape):
        up, dn = x0.copy(), x0.copy()
        up[idx] += 1e-3
        dn[idx] -= 1e-3
        num[idx] = (f(up)[1].item() - f(dn)[1].item()) / 2e-3
    assert np.linalg.norm(xt.grad - num) / np.linalg.norm(num) < 1e-4


def test_random_graph_generator_covers_every_op():
    seen = set()
    for seed in range(50):
        seen.update(r["kind"] for r in make_program(seed)[1])
    assert seen == set(OPS)


@pytest.mark.parametrize("seed", range(0, 50, 7))
def test_gradcheck_random_graphs(seed):
    err, _ = check_graph(seed)
    assert err < 1e-4


def test_no_grad_records_nothing():
    x = Tensor([1.0], requires_grad=True)
    with T.no_grad():
        y = x * 2.0
    assert not y.requires_grad and T.grad_enabled()


def test_non_finite_aborts():
    with pytest.raises(NonFiniteError):
        T.log(Tensor([0.0]))
    with pytest.raises(NonFiniteError):
        T.exp(Tensor([1e4]))


def test_dropout_needs_rng_in_training():
    x = Tensor(np.ones((2, 2)))
    assert T.dropout(x, 0.5, None, training=False) is x
    with pytest.raises(UsageError):
        T.dropout(x, 0.5, None, training=True)


def test_embedding_bounds():
    with pytest.raises(IndexError):
        T.embedding(Tensor(np.ones((3, 2))), [0, 3])


def test_determinism_same_ops_bit_identical():
    def run():
        rng = np.random.default_rng(11)
        a = Tensor(rng.normal(size=(5, 6)), requires_grad=True)
        b = Tensor(rng.normal(size=(6, 4)), requires_grad=True)
        h = T.layer_norm(T.matmul(a, b), Tensor(np.ones(4)), Tensor(np.zeros(4)))
        loss = T.cross_entropy(T.dropout(h, 0.2, rng), [0, 1, 2, 3, 0])
        T.backward(loss)
        return loss.data.tobytes(), a.grad.tobytes(), b.grad.tobytes()
    assert run() == run()


# ---------------------------------------------------------------- Adam

def test_adam_first_step_is_sign_step():
    p = np.array([1.0])
    adam_step([p], [np.array([0.3])], AdamState(lr=0.01))
    assert p[0] == pytest.approx(0.99, abs=1e-6)


def test_adam_zero_grad_leaves_param():
    p = np.array([1.0, -2.0])
    st_ = AdamState(lr=0.1)
    adam_step([p], [np.zeros(2)], st_)
    assert np.array_equal(p, [1.0, -2.0]) and st_.t == 1


def test_adam_deterministic():
    out = []
    for _ in range(2):
        p = np.array([0.5, 0.25])
        s = AdamState(lr=0.05)
        for g in ([0.1, -0.2], [0.3, 0.1]):
            adam_step([p], [np.array(g)], s)
        out.append(p.tobytes())
    assert out[0] == out[1]


def test_adam_shape_mismatch():
    with pytest.raises(DimensionError):
        adam_step([np.zeros(2)], [np.zeros(3)], AdamState())
    with pytest.raises(DimensionError):
        adam_step([np.zeros(2)], [], AdamState())


def test_adam_wrapper_reads_grads():
    x = Tensor([2.0], requires_grad=True)
    opt = Adam([x], lr=0.1)
    T.backward(x * x)
    opt.step()
    assert x.data[0] == pytest.approx(1.9, abs=1e-6)


def test_inverse_sqrt_schedule():
    assert inverse_sqrt_lr(1, 1.0, 4) == pytest.approx(0.25)
    assert inverse_sqrt_lr(4, 1.0, 4) == pytest.approx(1.0)
    assert inverse_sqrt_lr(16, 1.0, 4) == pytest.approx(0.5)
