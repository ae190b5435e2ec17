"""Alignment error rate, precision/recall and corpus BLEU."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .corpus import AlignmentSet
from .errors import UsageError


@dataclass
class AlignmentCounts:
    hyp: int = 0
    sure: int = 0
    hyp_sure: int = 0
    hyp_possible: int = 0

    def __add__(self, other: "AlignmentCounts") -> "AlignmentCounts":
        return AlignmentCounts(self.hyp + other.hyp, self.sure + other.sure,
                               self.hyp_sure + other.hyp_sure, self.hyp_possible + other.hyp_possible)

    @property
    def aer(self) -> float:
        denom = self.hyp + self.sure
        if denom == 0:
            return 0.0
        return 1.0 - (self.hyp_sure + self.hyp_possible) / denom

    @property
    def precision(self) -> float:
        return self.hyp_possible / self.hyp if self.hyp else 1.0

    @property
    def recall(self) -> float:
        return self.hyp_sure / self.sure if self.sure else 1.0


def counts(hyp: AlignmentSet, ref: AlignmentSet) -> AlignmentCounts:
    A = hyp.sure
    return AlignmentCounts(len(A), len(ref.sure), len(A & ref.sure), len(A & ref.possible))


def corpus_counts(hyps: Sequence[AlignmentSet], refs: Sequence[AlignmentSet]) -> AlignmentCounts:
    if len(hyps) != len(refs):
        raise UsageError(f"{len(hyps)} hypotheses but {len(refs)} references")
    total = AlignmentCounts()
    for h, r in zip(hyps, refs):
        total = total + counts(h, r)
    return total


def aer(hyp, ref) -> float:
    """AER of one pair, or pooled over a corpus when given two sequences."""
    if isinstance(hyp, AlignmentSet):
        return counts(hyp, ref).aer
    return corpus_counts(hyp, ref).aer


def precision_recall(hyp, ref) -> tuple[float, float]:
    c = counts(hyp, ref) if isinstance(hyp, AlignmentSet) else corpus_counts(hyp, ref)
    return c.precision, c.recall


def summary_line(c: AlignmentCounts) -> str:
    return (f"AER={c.aer:.4f} P={c.precision:.4f} R={c.recall:.4f} "
            f"links_hyp={c.hyp} links_sure={c.sure}")


def _ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(hyps: Sequence[Sequence], refs: Sequence[Sequence], max_order: int = 4) -> float:
    """Corpus BLEU-4 with brevity penalty.

    n-gram matches are pooled over the corpus. For n >= 2 a zero match count
    is smoothed to (0 + 1) / (total + 1); a zero unigram match gives 0.
    """
    if len(hyps) != len(refs):
        raise UsageError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise UsageError("BLEU of an empty corpus is undefined")
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = ref_len = 0
    for h, r in zip(hyps, refs):
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, max_order + 1):
            hc, rc = _ngrams(h, n), _ngrams(r, n)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            totals[n - 1] += max(len(h) - n + 1, 0)
    if hyp_len == 0 or matches[0] == 0:
        return 0.0
    log_p = 0.0
    for n in range(max_order):
        m, t = matches[n], totals[n]
        if n > 0 and m == 0:
            m, t = 1, t + 1
        log_p += math.log(m / t) / max_order
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_p)
