import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from alignlab.corpus import AlignmentSet, SynthSpec, Vocab, generate_synthetic
from alignlab.errors import FormatError, UsageError
from alignlab.guided import (AttentionInducer, Constraint, extract_constraints, guided_greedy_decode,
                             read_constraints, satisfaction_rate, satisfied, validate_constraints,
                             write_constraints)
from alignlab.training import TrainConfig, train
from alignlab.transformer import Transformer, TransformerConfig, greedy_decode


class StubInducer:
    """Aligns every checked token to a fixed source position (1-based), or nowhere."""

    needs_states = False

    def __init__(self, shifted, position=None):
        self.shifted = shifted
        self.position = position
        self.calls = 0

    def row(self, stack):
        self.calls += 1
        n = stack.weights[0].shape[1]
        out = np.zeros(n)
        if self.position is None:
            out[:] = -1.0
            out[n - 1] = 1.0  # always the last source word
        else:
            out[self.position - 1] = 1.0
        return out


def model(seed=0):
    return Transformer(TransformerConfig(14, 14, layers=2, heads=2, d_model=16, d_ff=32), seed=seed)


SRC = [4, 5, 6, 7]


def test_validation():
    with pytest.raises(UsageError):
        validate_constraints([Constraint((1, 2), [9]), Constraint((2, 3), [9])], 4)
    with pytest.raises(UsageError):
        validate_constraints([Constraint((1, 4), [9])], 5)
    with pytest.raises(UsageError):
        validate_constraints([Constraint((3, 5), [9])], 4)
    with pytest.raises(UsageError):
        Constraint((1, 1), [])
    validate_constraints([Constraint((1, 1), [9]), Constraint((2, 4), [9])], 4)


@pytest.mark.parametrize("shifted", [False, True])
def test_no_constraints_is_plain_greedy(shifted):
    m = model()
    plain, _ = greedy_decode(m, SRC, 12)
    assert guided_greedy_decode(m, SRC, [], StubInducer(shifted, 1), 12) == plain


@pytest.mark.parametrize("shifted", [False, True])
def test_inducer_outside_spans_is_plain_greedy(shifted):
    m = model(1)
    plain, _ = greedy_decode(m, SRC, 12)
    cons = [Constraint((1, 2), [13])]
    assert guided_greedy_decode(m, SRC, cons, StubInducer(shifted, None), 12) == plain


@pytest.mark.parametrize("shifted", [False, True])
def test_stub_first_token_replaced(shifted):
    m = model(2)
    out = guided_greedy_decode(m, SRC, [Constraint((1, 1), [13])], StubInducer(shifted, 1), 12)
    assert out[0] == 13


@pytest.mark.parametrize("shifted", [False, True])
def test_constraint_fires_once_and_splices_multi_token(shifted):
    m = model(3)
    cons = [Constraint((2, 3), [11, 12, 13])]
    out = guided_greedy_decode(m, SRC, cons, StubInducer(shifted, 2), 6)
    assert out[:3] == [11, 12, 13]
    assert len(out) <= 6 + 2
    assert not cons[0].used  # caller's constraints are not mutated
    assert sum(out[k:k + 3] == [11, 12, 13] for k in range(len(out))) == 1


def test_bad_max_len():
    with pytest.raises(UsageError):
        guided_greedy_decode(model(), SRC, [], StubInducer(False), 0)


@given(st.integers(0, 50), st.booleans(), st.integers(1, 4), st.integers(1, 8))
def test_length_bound(seed, shifted, pos, max_len):
    m = model(seed % 5)
    cons = [Constraint((1, 1), [9, 10]), Constraint((3, 4), [11, 12, 13])]
    out = guided_greedy_decode(m, SRC, cons, StubInducer(shifted, pos), max_len)
    fired = [c for c in cons if satisfied(out, c)]
    assert len(out) <= max_len + sum(len(c.tgt_tokens) - 1 for c in fired)


def test_attention_inducer_layer_checks():
    with pytest.raises(UsageError):
        AttentionInducer("shift", 5, 4)
    with pytest.raises(UsageError):
        AttentionInducer("bogus", 1, 4)
    assert AttentionInducer("shift", None, 4).layer == 3
    assert AttentionInducer("naive-la", None, 4).averaged


def test_extract_constraints_are_consistent():
    c = generate_synthetic(SynthSpec(p_swap=0.2, window=3, p_split=0.3, p_ins=0.2, seed=4), 60)
    rng = np.random.default_rng(0)
    for p in c.pairs:
        cons = extract_constraints(p.src, p.tgt, p.gold, rng)
        assert 1 <= len(cons) <= 3
        validate_constraints(cons, len(p.src))
        for con in cons:
            a, b = con.src_span
            tgts = sorted(t for s, t in p.gold.sure if a <= s <= b)
            assert con.tgt_tokens == tuple(p.tgt[tgts[0] - 1:tgts[-1]])
            assert all(a <= s <= b for s, t in p.gold.sure if tgts[0] <= t <= tgts[-1])


def test_extract_constraints_stop_words():
    gold = AlignmentSet.of([(1, 1), (2, 2)])
    cons = extract_constraints([4, 5], [8, 9], gold, np.random.default_rng(0), stop_words=[4, 5])
    assert cons == []


def test_satisfaction_rate():
    cons = [[Constraint((1, 1), [5, 6])], [Constraint((1, 1), [7]), Constraint((2, 2), [8])]]
    assert satisfaction_rate([[4, 5, 6], [7, 9]], cons) == pytest.approx(2 / 3)
    assert satisfaction_rate([[1]], [[]]) == 1.0


def test_constraint_file_round_trip(tmp_path):
    v = Vocab(["a", "b", "c"])
    cons = [[Constraint((1, 2), v.encode(["a", "b"]))], [], [Constraint((3, 3), v.encode(["c"]))]]
    write_constraints(tmp_path / "c.tsv", cons, v)
    assert (tmp_path / "c.tsv").read_text() == "1\t1-2\ta b\n3\t3-3\tc\n"
    back = read_constraints(tmp_path / "c.tsv", 3, v)
    assert [[(c.src_span, c.tgt_tokens) for c in cs] for cs in back] == \
        [[(c.src_span, c.tgt_tokens) for c in cs] for cs in cons]


@pytest.mark.parametrize("line", ["1\t1-2", "x\t1-1\ta", "1\t1:2\ta", "9\t1-1\ta", "1\t1-1\t "])
def test_constraint_file_errors(tmp_path, line):
    (tmp_path / "c.tsv").write_text(line + "\n")
    with pytest.raises(FormatError):
        read_constraints(tmp_path / "c.tsv", 2, Vocab(["a"]))


@pytest.fixture(scope="module")
def copy_task():
    spec = SynthSpec(vocab_size=30, min_len=3, max_len=6, seed=2)
    c = generate_synthetic(spec, 640)
    m = Transformer(TransformerConfig(len(c.src_vocab), len(c.tgt_vocab), layers=2, heads=2, d_model=32,
                                      d_ff=64, dropout=0.0), seed=1)
    train(m, c.pairs[:600], TrainConfig(epochs=40, max_tokens=256, lr=3e-3, warmup=50, label_smoothing=0.0))
    return c, m


def test_overfit_model_obeys_off_lexicon_constraints(copy_task):
    c, m = copy_task
    test = c.pairs[600:]
    rng = np.random.default_rng(0)
    outs, cons = [], []
    inducer = AttentionInducer("naive", 2, m.cfg.layers)
    for p in test:
        # repeated source words split attention between copies, so constrain a word that occurs once
        j = int(rng.choice([k + 1 for k, w in enumerate(p.src) if p.src.count(w) == 1]))
        # the companion word never appears in this monotone corpus, so the model cannot produce it unaided
        word = c.src_vocab.itos[p.src[j - 1]]
        comp = c.tgt_vocab.stoi["u" + c.lexicon[word][1:]]
        con = [Constraint((j, j), [comp])]
        outs.append(guided_greedy_decode(m, p.src, con, inducer, 2 * len(p.src)))
        cons.append(con)
    plain = [greedy_decode(m, p.src, 12)[0] for p in test]
    assert satisfaction_rate(plain, cons) == 0.0
    assert satisfaction_rate(outs, cons) == 1.0
