import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from alignlab.corpus import (BOS, EOS, PAD, UNK, AlignmentSet, SynthSpec, Vocab, format_talp,
                             generate_synthetic, load_parallel, parse_talp_line, read_alignments,
                             write_alignments, write_corpus)
from alignlab.errors import FormatError, UsageError


def _write(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_reserved_ids():
    v = Vocab(["a", "b"])
    assert (PAD, BOS, EOS, UNK) == (0, 1, 2, 3)
    assert v.itos[:4] == ["<pad>", "<bos>", "<eos>", "<unk>"]
    assert v.encode(["a", "zzz"]) == (4, UNK)
    assert v.decode([BOS, 4, 5, EOS]) == ["a", "b"]


def test_vocab_save_load(tmp_path):
    v = Vocab.build([["x", "y", "x"], ["z"]])
    v.save(tmp_path / "v")
    assert Vocab.load(tmp_path / "v") == v
    assert v.itos[4] == "x"  # most frequent first


def test_vocab_load_rejects_garbage(tmp_path):
    _write(tmp_path / "v", ["<pad>\t0", "oops"])
    with pytest.raises(FormatError):
        Vocab.load(tmp_path / "v")


def test_load_parallel_two_lines(tmp_path):
    s = _write(tmp_path / "s", ["a b", "c"])
    t = _write(tmp_path / "t", ["x", "y z"])
    vs, vt, pairs = load_parallel(s, t)
    assert len(pairs) == 2
    assert set(vs.itos[4:]) == {"a", "b", "c"} and set(vt.itos[4:]) == {"x", "y", "z"}


def test_load_parallel_min_freq(tmp_path):
    s = _write(tmp_path / "s", ["a a b", "a"])
    t = _write(tmp_path / "t", ["x", "x"])
    vs, _, pairs = load_parallel(s, t, min_freq=2)
    assert "b" not in vs.stoi
    assert pairs[0].src[2] == UNK


def test_load_parallel_line_mismatch(tmp_path):
    s = _write(tmp_path / "s", ["a", "b"])
    t = _write(tmp_path / "t", ["x"])
    with pytest.raises(FormatError):
        load_parallel(s, t)


def test_load_parallel_skips_empty(tmp_path, caplog):
    s = _write(tmp_path / "s", ["a", "", "b"])
    t = _write(tmp_path / "t", ["x", "y", "z"])
    with caplog.at_level(logging.WARNING):
        _, _, pairs = load_parallel(s, t)
    assert [p.index for p in pairs] == [0, 2]
    assert "skipping line 2" in caplog.text


def test_load_parallel_gold_out_of_bounds(tmp_path):
    s = _write(tmp_path / "s", ["a b"])
    t = _write(tmp_path / "t", ["x"])
    g = _write(tmp_path / "g", ["3-1"])
    with pytest.raises(FormatError):
        load_parallel(s, t, align_path=g)


def test_talp_line_format():
    a = parse_talp_line("1-1 2p3")
    assert a.sure == {(1, 1)}
    assert a.possible == {(1, 1), (2, 3)}


def test_talp_empty_line():
    assert len(parse_talp_line("")) == 0


def test_talp_zero_index(tmp_path):
    _write(tmp_path / "a", ["1-1", "0-1"])
    with pytest.raises(FormatError, match="line 2"):
        read_alignments(tmp_path / "a")


@pytest.mark.parametrize("bad", ["1-", "a-1", "1x2", "-1-2"])
def test_talp_malformed(bad):
    with pytest.raises(FormatError):
        parse_talp_line(bad)


def test_talp_canonical_order():
    a = AlignmentSet(frozenset({(2, 1), (1, 2)}), frozenset({(2, 1), (1, 2), (1, 1)}))
    assert format_talp(a) == "1-2 2-1 1p1"


links = st.frozensets(st.tuples(st.integers(1, 9), st.integers(1, 9)), max_size=12)


@given(links, links)
def test_talp_round_trip(sure, extra):
    a = AlignmentSet(sure, sure | extra)
    assert parse_talp_line(format_talp(a)) == a


def test_alignment_set_invariants():
    with pytest.raises(ValueError):
        AlignmentSet(frozenset({(1, 1)}), frozenset())
    with pytest.raises(ValueError):
        AlignmentSet.of([(0, 1)])


# ---------------------------------------------------------------- synthetic generator

def test_synth_monotone_diagonal():
    c = generate_synthetic(SynthSpec(seed=3), 50)
    for p in c.pairs:
        assert len(p.src) == len(p.tgt)
        assert p.gold.sure == {(k, k) for k in range(1, len(p.src) + 1)}
        assert p.gold.possible == p.gold.sure


def test_synth_full_split():
    c = generate_synthetic(SynthSpec(p_split=1.0, seed=3), 50)
    for p in c.pairs:
        n = len(p.src)
        assert len(p.tgt) == 2 * n
        assert p.gold.sure == {(k, t) for k in range(1, n + 1) for t in (2 * k - 1, 2 * k)}


def test_synth_deterministic():
    spec = SynthSpec(p_swap=0.2, window=3, p_split=0.1, p_ins=0.1, seed=5)
    a, b = generate_synthetic(spec, 100), generate_synthetic(spec, 100)
    assert a.lines() == b.lines()


def test_synth_lexicon_is_bijective_and_used():
    c = generate_synthetic(SynthSpec(seed=2, vocab_size=20), 200)
    assert len(set(c.lexicon.values())) == 20
    for p in c.pairs:
        for s, t in p.gold.sure:
            src_word = c.src_vocab.itos[p.src[s - 1]]
            tgt_word = c.tgt_vocab.itos[p.tgt[t - 1]]
            assert tgt_word == c.lexicon[src_word] or tgt_word.startswith("u")


def test_synth_block_permutation_without_swaps():
    spec = SynthSpec(window=3, seed=4, min_len=6, max_len=6)
    c = generate_synthetic(spec, 20)
    orders = set()
    for p in c.pairs:
        src_of = dict((t, s) for s, t in p.gold.sure)
        order = tuple(src_of[t] for t in range(1, 7))
        first = tuple(k - 1 for k in order[:3])
        second = tuple(k - 4 for k in order[3:])
        assert first == second and first != (0, 1, 2)
        orders.add(order)
    assert len(orders) == 1  # the block permutation is fixed by the seed


def test_synth_spec_validation():
    with pytest.raises(UsageError):
        SynthSpec(p_swap=1.5)
    with pytest.raises(UsageError):
        SynthSpec(min_len=0)
    with pytest.raises(UsageError):
        SynthSpec(window=0)


@given(st.integers(0, 10_000), st.floats(0, 1), st.integers(1, 4), st.floats(0, 1), st.floats(0, 1))
def test_synth_gold_properties(seed, p_swap, window, p_split, p_ins):
    spec = SynthSpec(vocab_size=12, min_len=1, max_len=8, p_swap=p_swap, window=window,
                     p_split=p_split, p_ins=p_ins, seed=seed)
    c = generate_synthetic(spec, 5)
    noise = {c.tgt_vocab.stoi[f"n{k}"] for k in range(spec.n_noise)}
    for p in c.pairs:
        for s, t in p.gold.sure:
            assert 1 <= s <= len(p.src) and 1 <= t <= len(p.tgt)
        per_tgt = {}
        for s, t in p.gold.sure:
            per_tgt.setdefault(t, []).append(s)
        for t, tok in enumerate(p.tgt, 1):
            if tok in noise:
                assert t not in per_tgt
            else:
                assert len(per_tgt[t]) == 1
        assert parse_talp_line(format_talp(p.gold)) == p.gold


def test_write_corpus_round_trip(tmp_path):
    c = generate_synthetic(SynthSpec(p_split=0.3, p_ins=0.3, seed=9), 30)
    write_corpus(c, tmp_path / "x")
    vs, vt, pairs = load_parallel(tmp_path / "x.src", tmp_path / "x.tgt", align_path=tmp_path / "x.talp")
    assert [p.gold for p in pairs] == [p.gold for p in c.pairs]
    assert [vt.decode(p.tgt) for p in pairs] == [c.tgt_vocab.decode(p.tgt) for p in c.pairs]
    write_alignments([p.gold for p in pairs], tmp_path / "y.talp")
    assert (tmp_path / "y.talp").read_text() == (tmp_path / "x.talp").read_text()
