import hashlib
import math

import numpy as np
import pytest

from alignlab import tensor as T
from alignlab.aet import (AetModel, AetTrainConfig, aet_forward, aet_loss, induce_aet, normalize_reference,
                          train_aet)
from alignlab.corpus import AlignmentSet, ParallelPair
from alignlab.errors import DimensionError, FormatError, UsageError
from alignlab.metrics import aer
from alignlab.tensor import Tensor
from alignlab.transformer import Transformer, TransformerConfig

A = AlignmentSet.of


def base(seed=0, layers=2):
    return Transformer(TransformerConfig(12, 12, layers=layers, heads=2, d_model=16, d_ff=32, dropout=0.1),
                       seed=seed)


def digest(model):
    h = hashlib.sha256()
    for name, arr in model.state_arrays().items():
        h.update(name.encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def test_normalize_reference_examples():
    ref = normalize_reference(A([(1, 1), (3, 1)]), 2, 3)
    assert np.allclose(ref[0], [0.5, 0, 0.5])
    assert not ref[1].any()
    one_hot = normalize_reference(A([(2, 1), (1, 2)]), 2, 2)
    assert np.array_equal(one_hot, [[0, 1], [1, 0]])
    with pytest.raises(IndexError):
        normalize_reference(A([(4, 1)]), 2, 3)


def test_loss_examples():
    S = Tensor([[0.5, 0.5]])
    assert aet_loss(S, np.array([[1.0, 0.0]])).item() == pytest.approx(math.log(2), abs=1e-6)
    assert aet_loss(S, np.zeros((1, 2))).item() == 0.0
    near = aet_loss(Tensor([[1 - 1e-7, 1e-7]]), np.array([[1.0, 0.0]])).item()
    assert 0 <= near < 1e-6
    with pytest.raises(DimensionError):
        aet_loss(S, np.zeros((2, 2)))


def test_loss_clamps_zero_scores():
    loss = aet_loss(Tensor([[1.0, 0.0]]), np.array([[0.0, 1.0]])).item()
    assert loss == pytest.approx(-math.log(1e-9), rel=1e-5)


def test_parameter_count_and_layer_range():
    m = AetModel(base(), 2)
    assert m.num_parameters() == 2 * 2 * 16 * 8
    with pytest.raises(UsageError):
        AetModel(base(), 3)
    with pytest.raises(UsageError):
        AetModel(base(), 1, init="other")


def test_forward_rows_are_distributions():
    m = AetModel(base(), 1, seed=3)
    S = aet_forward(m, [4, 5, 6, 7], [8, 9, 10])
    assert S.shape == (3, 4)
    assert np.allclose(S.sum(axis=1), 1.0, atol=1e-5) and (S >= 0).all()
    a = induce_aet(m, [4, 5, 6, 7], [8, 9, 10])
    assert len(a) == 3 and a == induce_aet(m, [4, 5, 6, 7], [8, 9, 10])


def test_gradient_matches_differences():
    rng = np.random.default_rng(0)
    mem = rng.normal(size=(1, 3, 16))
    qry = rng.normal(size=(1, 4, 16))
    ref = normalize_reference(A([(1, 1), (3, 2), (2, 3)]), 3, 3)[None]
    m = AetModel(base(), 1, seed=1)
    m.key = Tensor(m.key.data, requires_grad=True, dtype=np.float64)
    m.query = Tensor(m.query.data, requires_grad=True, dtype=np.float64)
    mask = np.ones((1, 3), dtype=bool)

    def loss():
        S = m.attend(mem, qry, mask)[:, 1:, :]
        return aet_loss(S, ref, np.array([3]))

    T.backward(loss())
    for p in (m.key, m.query):
        num = np.zeros_like(p.data)
        for idx in np.ndindex(p.shape):
            old = p.data[idx]
            p.data[idx] = old + 1e-3
            up = loss().item()
            p.data[idx] = old - 1e-3
            dn = loss().item()
            p.data[idx] = old
            num[idx] = (up - dn) / 2e-3
        assert np.linalg.norm(p.grad - num) / np.linalg.norm(num) < 1e-4


def _pairs(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k = int(rng.integers(2, 6))
        src = tuple(int(v) for v in rng.integers(4, 12, size=k))
        tgt = tuple(int(v) for v in rng.integers(4, 12, size=k))
        out.append(ParallelPair(src, tgt, A([(j, j) for j in range(1, k + 1)])))
    return out


def test_training_keeps_base_frozen_and_lowers_loss():
    b = base(seed=4)
    before = digest(b)
    pairs = _pairs(16)
    m = AetModel(b, 2, seed=0)
    res = train_aet(m, pairs, [p.gold for p in pairs], AetTrainConfig(steps=150, lr=1e-2, batch_size=8))
    assert digest(b) == before
    assert np.mean(res.step_losses[-10:]) < np.mean(res.step_losses[:10])


def test_zero_labels_leave_parameters():
    pairs = _pairs(4)
    m = AetModel(base(), 1, seed=0)
    key, query = m.key.data.copy(), m.query.data.copy()
    train_aet(m, pairs, [A([]) for _ in pairs], AetTrainConfig(steps=5, lr=1e-2, batch_size=4))
    assert np.array_equal(m.key.data, key) and np.array_equal(m.query.data, query)


def test_label_length_mismatch():
    pairs = _pairs(3)
    with pytest.raises(UsageError):
        train_aet(AetModel(base(), 1), pairs, [p.gold for p in pairs[:2]], AetTrainConfig(steps=1))


def test_overfit_single_pair_reproduces_labels():
    pair = ParallelPair((4, 5, 6, 7), (8, 9, 10), A([(3, 1), (1, 2), (4, 3)]))
    m = AetModel(base(seed=5), 2, seed=2)
    train_aet(m, [pair], [pair.gold], AetTrainConfig(steps=300, lr=5e-2, batch_size=1))
    assert induce_aet(m, pair.src, pair.tgt) == pair.gold
    assert aer(induce_aet(m, pair.src, pair.tgt), pair.gold) == 0.0


def test_checkpoint_round_trip(tmp_path):
    m = AetModel(base(seed=6), 2, seed=3)
    m.save(tmp_path / "a.ckpt")
    m2 = AetModel.load(tmp_path / "a.ckpt")
    assert m2.layer == 2
    assert np.array_equal(m2.key.data, m.key.data) and np.array_equal(m2.query.data, m.query.data)
    assert digest(m2.base) == digest(m.base)
    m.base.save(tmp_path / "b.ckpt")
    with pytest.raises(FormatError):
        AetModel.load(tmp_path / "b.ckpt")
