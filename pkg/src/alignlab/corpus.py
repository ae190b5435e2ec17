"""Parallel corpora, vocabularies, talp alignment files and a synthetic task.

Alignment links are 1-based ``(source_pos, target_pos)`` pairs throughout.
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, UsageError

log = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")

Link = tuple[int, int]


class Vocab:
    """Token <-> id map with the four reserved ids fixed at 0..3."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(SPECIALS)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(SPECIALS)}
        for tok in tokens:
            if tok not in self.stoi:
                self.stoi[tok] = len(self.itos)
                self.itos.append(tok)

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]], min_freq: int = 1) -> "Vocab":
        counts = Counter(tok for sent in sentences for tok in sent)
        kept = sorted((t for t, c in counts.items() if c >= min_freq and t not in SPECIALS),
                      key=lambda t: (-counts[t], t))
        return cls(kept)

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.itos == other.itos

    def encode(self, tokens: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.stoi.get(t, UNK) for t in tokens)

    def decode(self, ids: Iterable[int], strip: bool = True) -> list[str]:
        out = []
        for i in ids:
            if strip and i in (PAD, BOS, EOS):
                continue
            out.append(self.itos[i])
        return out

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self.itos):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    tok, idx = line.rsplit("\t", 1)
                    entries.append((int(idx), tok))
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: expected 'token<TAB>id'") from exc
        entries.sort()
        if [i for i, _ in entries] != list(range(len(entries))):
            raise FormatError(f"{path}: ids are not a contiguous range from 0")
        toks = [t for _, t in entries]
        if tuple(toks[:4]) != SPECIALS:
            raise FormatError(f"{path}: reserved ids 0..3 must be {SPECIALS}")
        return cls(toks[4:])


@dataclass(frozen=True)
class AlignmentSet:
    """Sure links and possible links, ``sure <= possible``.

    Hypotheses carry no split, so their ``possible`` equals ``sure``.
    """

    sure: frozenset = frozenset()
    possible: frozenset = frozenset()

    def __post_init__(self):
        if not self.sure <= self.possible:
            raise ValueError("sure links must be a subset of possible links")
        for s, t in self.possible:
            if s < 1 or t < 1:
                raise ValueError(f"alignment indices are 1-based, got ({s}, {t})")

    @classmethod
    def of(cls, links: Iterable[Link]) -> "AlignmentSet":
        links = frozenset((int(s), int(t)) for s, t in links)
        return cls(links, links)

    @property
    def links(self) -> frozenset:
        return self.sure

    def __len__(self) -> int:
        return len(self.sure)

    def transposed(self) -> "AlignmentSet":
        return AlignmentSet(frozenset((t, s) for s, t in self.sure),
                            frozenset((t, s) for s, t in self.possible))


@dataclass
class ParallelPair:
    src: tuple[int, ...]
    tgt: tuple[int, ...]
    gold: AlignmentSet | None = None
    index: int = 0  # line number (0-based) in the originating files

    def reversed(self) -> "ParallelPair":
        gold = self.gold.transposed() if self.gold is not None else None
        return ParallelPair(self.tgt, self.src, gold, self.index)


# ---------------------------------------------------------------- talp files

_LINK_RE = re.compile(r"^(\d+)([-p])(\d+)$")


def parse_talp_line(line: str, lineno: int = 0) -> AlignmentSet:
    sure, possible = set(), set()
    for tok in line.split():
        m = _LINK_RE.match(tok)
        if not m:
            raise FormatError(f"line {lineno}: malformed link {tok!r}")
        s, kind, t = int(m.group(1)), m.group(2), int(m.group(3))
        if s == 0 or t == 0:
            raise FormatError(f"line {lineno}: link {tok!r} uses index 0; talp indices are 1-based")
        possible.add((s, t))
        if kind == "-":
            sure.add((s, t))
    return AlignmentSet(frozenset(sure), frozenset(possible))


def format_talp(a: AlignmentSet) -> str:
    sure = [f"{s}-{t}" for s, t in sorted(a.sure)]
    maybe = [f"{s}p{t}" for s, t in sorted(a.possible - a.sure)]
    return " ".join(sure + maybe)


def read_alignments(path: str | Path) -> list[AlignmentSet]:
    with open(path, encoding="utf-8") as fh:
        return [parse_talp_line(line, n) for n, line in enumerate(fh, 1)]


def write_alignments(sets: Iterable[AlignmentSet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in sets:
            fh.write(format_talp(a) + "\n")


# ---------------------------------------------------------------- text corpora

def read_lines(path: str | Path) -> list[list[str]]:
    try:
        with open(path, encoding="utf-8") as fh:
            return [line.split() for line in fh]
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not valid UTF-8") from exc


def load_parallel(src_path, tgt_path, *, min_freq: int = 1, vocabs: tuple[Vocab, Vocab] | None = None,
                  align_path=None, max_len: int | None = None) -> tuple[Vocab, Vocab, list[ParallelPair]]:
    """Read a whitespace-tokenised parallel corpus.

    With ``vocabs=None`` both vocabularies are built from the files; otherwise
    the given ones are reused and unknown tokens map to ``<unk>``. Lines where
    either side is empty (or longer than ``max_len``) are skipped with a warning.
    """
    src_lines, tgt_lines = read_lines(src_path), read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise FormatError(f"line counts differ: {src_path} has {len(src_lines)}, "
                          f"{tgt_path} has {len(tgt_lines)}")
    golds = read_alignments(align_path) if align_path is not None else None
    if golds is not None and len(golds) != len(src_lines):
        raise FormatError(f"{align_path} has {len(golds)} lines, corpus has {len(src_lines)}")

    keep = []
    for i, (s, t) in enumerate(zip(src_lines, tgt_lines)):
        if not s or not t:
            log.warning("skipping line %d: empty side", i + 1)
            continue
        if max_len is not None and (len(s) > max_len or len(t) > max_len):
            log.warning("skipping line %d: longer than %d tokens", i + 1, max_len)
            continue
        keep.append(i)

    if vocabs is None:
        vs = Vocab.build((src_lines[i] for i in keep), min_freq)
        vt = Vocab.build((tgt_lines[i] for i in keep), min_freq)
    else:
        vs, vt = vocabs

    pairs = []
    for i in keep:
        gold = golds[i] if golds is not None else None
        if gold is not None:
            _check_bounds(gold, len(src_lines[i]), len(tgt_lines[i]), i + 1)
        pairs.append(ParallelPair(vs.encode(src_lines[i]), vt.encode(tgt_lines[i]), gold, i))
    return vs, vt, pairs


def _check_bounds(a: AlignmentSet, n_src: int, n_tgt: int, lineno: int) -> None:
    for s, t in a.possible:
        if s > n_src or t > n_tgt:
            raise FormatError(f"line {lineno}: link ({s}, {t}) outside sentence of "
                              f"{n_src} x {n_tgt} words")


# ---------------------------------------------------------------- synthetic task

@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic translation task.

    Each source word has a primary target word and a companion word; with
    probability ``p_split`` it is rendered as both. Target units are reordered
    by a fixed seed-drawn permutation applied to every full window of ``window``
    units, then adjacent units are swapped with probability ``p_swap``. A noise
    word with no links is inserted before each unit with probability ``p_ins``.
    """

    vocab_size: int = 50
    min_len: int = 3
    max_len: int = 10
    p_swap: float = 0.0
    window: int = 1
    p_split: float = 0.0
    p_ins: float = 0.0
    n_noise: int = 5
    seed: int = 1

    def __post_init__(self):
        for name in ("p_swap", "p_split", "p_ins"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise UsageError(f"{name} must be in [0, 1], got {p}")
        if self.min_len < 1 or self.max_len < self.min_len:
            raise UsageError(f"bad length range [{self.min_len}, {self.max_len}]")
        if self.window < 1:
            raise UsageError(f"window must be >= 1, got {self.window}")
        if self.vocab_size < 1 or self.n_noise < 1:
            raise UsageError("vocab_size and n_noise must be positive")


@dataclass
class SynthCorpus:
    src_vocab: Vocab
    tgt_vocab: Vocab
    pairs: list[ParallelPair] = field(default_factory=list)
    lexicon: dict[str, str] = field(default_factory=dict)

    def lines(self) -> tuple[list[str], list[str], list[str]]:
        src = [" ".join(self.src_vocab.decode(p.src)) for p in self.pairs]
        tgt = [" ".join(self.tgt_vocab.decode(p.tgt)) for p in self.pairs]
        ali = [format_talp(p.gold) for p in self.pairs]
        return src, tgt, ali


def generate_synthetic(spec: SynthSpec, n: int) -> SynthCorpus:
    """Generate ``n`` sentence pairs whose gold links are exact by construction."""
    rng = np.random.default_rng(spec.seed)
    V = spec.vocab_size
    primary = rng.permutation(V)
    companion = rng.permutation(V)
    block = np.arange(spec.window)
    if spec.window > 1:
        while (block == np.arange(spec.window)).all():
            block = rng.permutation(spec.window)

    src_vocab = Vocab(f"s{k}" for k in range(V))
    tgt_vocab = Vocab([f"t{k}" for k in range(V)] + [f"u{k}" for k in range(V)]
                      + [f"n{k}" for k in range(spec.n_noise)])
    lexicon = {f"s{k}": f"t{primary[k]}" for k in range(V)}
    prim_id = [tgt_vocab.stoi[f"t{primary[k]}"] for k in range(V)]
    comp_id = [tgt_vocab.stoi[f"u{companion[k]}"] for k in range(V)]
    noise_id = [tgt_vocab.stoi[f"n{k}"] for k in range(spec.n_noise)]

    pairs = []
    for idx in range(n):
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        words = rng.integers(0, V, size=length)
        units = []
        for j, w in enumerate(words):
            toks = [prim_id[w]]
            if rng.random() < spec.p_split:
                toks.append(comp_id[w])
            units.append((j + 1, toks))

        order: list[int] = []
        for start in range(0, length, spec.window):
            size = min(spec.window, length - start)
            order.extend(start + int(k) for k in block if k < size)
        units = [units[k] for k in order]

        k = 0
        while k < len(units) - 1:
            if rng.random() < spec.p_swap:
                units[k], units[k + 1] = units[k + 1], units[k]
                k += 2
            else:
                k += 1

        tgt, links = [], []
        for s, toks in units:
            if rng.random() < spec.p_ins:
                tgt.append(noise_id[int(rng.integers(spec.n_noise))])
            for tok in toks:
                tgt.append(tok)
                links.append((s, len(tgt)))
        src = tuple(src_vocab.stoi[f"s{w}"] for w in words)
        pairs.append(ParallelPair(src, tuple(tgt), AlignmentSet.of(links), idx))
    return SynthCorpus(src_vocab, tgt_vocab, pairs, lexicon)


def write_corpus(corpus: SynthCorpus, prefix: str | Path, start: int = 0, stop: int | None = None) -> None:
    """Write ``prefix.src``, ``prefix.tgt`` and ``prefix.talp`` for a slice of pairs."""
    src, tgt, ali = corpus.lines()
    sl = slice(start, stop)
    for ext, lines in (("src", src[sl]), ("tgt", tgt[sl]), ("talp", ali[sl])):
        with open(f"{prefix}.{ext}", "w", encoding="utf-8") as fh:
            fh.writelines(line + "\n" for line in lines)
