"""Dictionary-guided greedy decoding.

A constraint pairs a short source span with target tokens. While decoding, the
most recent committed token is aligned to the source with an inducer; when it
lands inside an unused span the token is replaced by the constraint's target
tokens and decoding resumes from the spliced prefix.

NAIVE inducers align a token on the step that outputs it. SHIFT and AET
inducers align it one step later, when it is the decoder input, so the token
being revised is the one before the current prediction.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import EOS, AlignmentSet, Vocab
from .errors import FormatError, UsageError
from .induction import default_layer
from .transformer import AttentionStack, PrefixDecoder, Transformer

MAX_SPAN = 3


@dataclass
class Constraint:
    src_span: tuple[int, int]   # 1-based, inclusive
    tgt_tokens: tuple[int, ...]
    used: bool = False

    def __post_init__(self):
        self.src_span = (int(self.src_span[0]), int(self.src_span[1]))
        self.tgt_tokens = tuple(int(t) for t in self.tgt_tokens)
        if not self.tgt_tokens:
            raise UsageError("constraint has no target tokens")

    def covers(self, j: int) -> bool:
        return self.src_span[0] <= j <= self.src_span[1]


def validate_constraints(constraints: Sequence[Constraint], src_len: int) -> None:
    spans = []
    for c in constraints:
        a, b = c.src_span
        if not 1 <= a <= b <= src_len:
            raise UsageError(f"constraint span {a}-{b} outside source of length {src_len}")
        if b - a + 1 > MAX_SPAN:
            raise UsageError(f"constraint span {a}-{b} longer than {MAX_SPAN} tokens")
        spans.append((a, b))
    spans.sort()
    for (a1, b1), (a2, b2) in zip(spans, spans[1:]):
        if a2 <= b1:
            raise UsageError(f"constraint spans {a1}-{b1} and {a2}-{b2} overlap")


# ------------------------------------------------------------------ inducers

class Inducer(Protocol):
    shifted: bool
    needs_states: bool

    def row(self, stack: AttentionStack) -> np.ndarray:
        """Source scores for the token the last decoder position refers to."""


class AttentionInducer:
    def __init__(self, method: str, layer: int | None, num_layers: int):
        base = method.removesuffix("-la")
        if base not in ("naive", "shift"):
            raise UsageError(f"unknown inducer {method!r}")
        self.averaged = method.endswith("-la")
        self.shifted = base == "shift"
        self.needs_states = False
        self.layer = default_layer(base, num_layers) if layer is None else layer
        if not 1 <= self.layer <= num_layers:
            raise UsageError(f"layer {self.layer} out of range [1, {num_layers}]")

    def row(self, stack: AttentionStack) -> np.ndarray:
        if self.averaged:
            return np.mean([w[-1] for w in stack.weights], axis=0)
        return stack.layer(self.layer)[-1]


class AetInducer:
    shifted = True
    needs_states = True

    def __init__(self, aet):
        self.aet = aet

    def row(self, stack: AttentionStack) -> np.ndarray:
        from .aet import aet_scores_from_stack
        return aet_scores_from_stack(self.aet, stack, rows=slice(-1, None))[0]


# ------------------------------------------------------------------ decoding

def guided_greedy_decode(model: Transformer, src: Sequence[int], constraints: Sequence[Constraint],
                         inducer: Inducer, max_len: int) -> list[int]:
    """Greedy decoding with constraint splicing. ``constraints`` are copied, not mutated.

    ``max_len`` bounds the number of greedy steps; each splice may add
    ``len(tgt_tokens) - 1`` tokens on top of it.
    """
    if max_len < 1:
        raise UsageError("max_len must be >= 1")
    validate_constraints(constraints, len(src))
    pending = [Constraint(c.src_span, c.tgt_tokens, c.used) for c in constraints]
    dec = PrefixDecoder(model, src, capture_states=inducer.needs_states)
    tokens: list[int] = []
    frozen: set[int] = set()  # spliced positions are never revised again
    extra = 0
    checked = 0               # tokens[:checked] have had their alignment looked at

    def fire(scores: np.ndarray) -> Constraint | None:
        j = int(np.argmax(scores)) + 1
        for c in pending:
            if not c.used and c.covers(j):
                return c
        return None

    def splice(pos: int, c: Constraint) -> None:
        nonlocal extra, checked
        c.used = True
        del tokens[pos:]
        tokens.extend(c.tgt_tokens)
        frozen.update(range(pos, len(tokens)))
        extra += len(c.tgt_tokens) - 1
        checked = len(tokens)

    while True:
        budget_left = len(tokens) - extra < max_len
        logits, stack = dec.step(tokens)
        if inducer.shifted and checked < len(tokens):
            pos = len(tokens) - 1
            checked = len(tokens)
            if pos not in frozen:
                c = fire(inducer.row(stack))
                if c is not None:
                    splice(pos, c)
                    continue
        if not budget_left:
            break
        nxt = int(np.argmax(logits))
        if nxt == EOS:
            break
        tokens.append(nxt)
        if not inducer.shifted:
            checked = len(tokens)
            c = fire(inducer.row(stack))
            if c is not None:
                splice(len(tokens) - 1, c)
        if not inducer.shifted and len(tokens) - extra >= max_len:
            break
    return tokens


# ------------------------------------------------------------------ constraint sampling

def _phrase_pairs(n_src: int, n_tgt: int, gold: AlignmentSet, max_span: int) -> list[tuple[int, int, int, int]]:
    """Source spans whose links cover a contiguous target range aligned only into that span."""
    links = gold.sure
    by_src: dict[int, set[int]] = {}
    by_tgt: dict[int, set[int]] = {}
    for s, t in links:
        by_src.setdefault(s, set()).add(t)
        by_tgt.setdefault(t, set()).add(s)
    out = []
    for a in range(1, n_src + 1):
        for b in range(a, min(n_src, a + max_span - 1) + 1):
            if any(j not in by_src for j in range(a, b + 1)):
                break
            tgts = set().union(*(by_src[j] for j in range(a, b + 1)))
            c, d = min(tgts), max(tgts)
            ok = all(t in by_tgt and by_tgt[t] <= set(range(a, b + 1)) for t in range(c, d + 1))
            if ok:
                out.append((a, b, c, d))
    return out


def extract_constraints(src: Sequence[int], tgt: Sequence[int], gold: AlignmentSet,
                        rng: np.random.Generator, max_constraints: int = 3,
                        max_span: int = MAX_SPAN, stop_words: Iterable[int] = ()) -> list[Constraint]:
    """Sample up to ``max_constraints`` non-overlapping gold-consistent constraints."""
    stop = set(stop_words)
    cands = [p for p in _phrase_pairs(len(src), len(tgt), gold, max_span)
             if not all(src[j - 1] in stop for j in range(p[0], p[1] + 1))]
    order = rng.permutation(len(cands))
    taken: list[tuple[int, int, int, int]] = []
    for k in order:
        a, b, c, d = cands[k]
        if any(a <= b2 and a2 <= b for a2, b2, _, _ in taken):
            continue
        taken.append(cands[k])
        if len(taken) == max_constraints:
            break
    taken.sort()
    return [Constraint((a, b), tuple(tgt[c - 1:d])) for a, b, c, d in taken]


def satisfied(output: Sequence[int], c: Constraint) -> bool:
    n = len(c.tgt_tokens)
    out = tuple(output)
    return any(out[k:k + n] == c.tgt_tokens for k in range(len(out) - n + 1))


def satisfaction_rate(outputs: Sequence[Sequence[int]], constraints: Sequence[Sequence[Constraint]]) -> float:
    """Fraction of constraints whose target tokens appear contiguously in the output. 1.0 when none."""
    total = hit = 0
    for out, cs in zip(outputs, constraints):
        for c in cs:
            total += 1
            hit += satisfied(out, c)
    return hit / total if total else 1.0


# ------------------------------------------------------------------ file I/O

def write_constraints(path: str | Path, constraints: Sequence[Sequence[Constraint]], tgt_vocab: Vocab) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid, cs in enumerate(constraints, start=1):
            for c in cs:
                toks = " ".join(tgt_vocab.decode(c.tgt_tokens, strip=False))
                fh.write(f"{sid}\t{c.src_span[0]}-{c.src_span[1]}\t{toks}\n")


def read_constraints(path: str | Path, n_sentences: int, tgt_vocab: Vocab) -> list[list[Constraint]]:
    out: list[list[Constraint]] = [[] for _ in range(n_sentences)]
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            try:
                if len(parts) != 3:
                    raise ValueError("expected 3 tab-separated fields")
                sid = int(parts[0])
                a, b = (int(v) for v in parts[1].split("-"))
                toks = parts[2].split()
                if not toks:
                    raise ValueError("no target tokens")
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad constraint line: {exc}") from exc
            if not 1 <= sid <= n_sentences:
                raise FormatError(f"{path}:{lineno}: sentence id {sid} outside 1..{n_sentences}")
            out[sid - 1].append(Constraint((a, b), tuple(tgt_vocab.encode(toks))))
    return out
