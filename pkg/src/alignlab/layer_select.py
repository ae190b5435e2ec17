"""Pick extraction layers by cross-direction agreement, without gold links."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import AlignmentSet, ParallelPair
from .errors import UsageError
from .induction import induce_all_layers
from .metrics import aer
from .transformer import Transformer, attention_stacks


@dataclass
class LayerSelection:
    fwd_layer: int
    rev_layer: int
    matrix: np.ndarray          # [i-1, j-1]: fwd layer i as hypothesis, rev layer j as reference
    matrix_swapped: np.ndarray  # same cells with hypothesis/reference roles exchanged

    def format(self) -> str:
        lines = [f"selected={self.fwd_layer},{self.rev_layer}"]
        lines += [",".join(f"{v:.6f}" for v in row) for row in self.matrix]
        return "\n".join(lines) + "\n"


def argmin_cell(matrix: np.ndarray) -> tuple[int, int]:
    """1-based (row, col) of the smallest entry; the first in row-major order wins ties."""
    matrix = np.asarray(matrix)
    k = int(np.argmin(matrix))
    i, j = divmod(k, matrix.shape[1])
    return i + 1, j + 1


def agreement_matrices(fwd_layers: Sequence[Sequence[AlignmentSet]],
                       rev_layers: Sequence[Sequence[AlignmentSet]]) -> tuple[np.ndarray, np.ndarray]:
    """Corpus AER for every (fwd layer, rev layer) pair.

    ``rev_layers`` are in the reverse model's own orientation and are
    transposed here. Model alignments have no sure/possible split, so each
    reference is used with possible == sure.
    """
    rev_t = [[a.transposed() for a in layer] for layer in rev_layers]
    M = np.zeros((len(fwd_layers), len(rev_t)))
    Msw = np.zeros_like(M)
    for i, hyp in enumerate(fwd_layers):
        for j, ref in enumerate(rev_t):
            M[i, j] = aer(list(hyp), ref)
            Msw[i, j] = aer(ref, list(hyp))
    return M, Msw


def check_directions(model_fwd: Transformer, model_rev: Transformer) -> None:
    f, r = model_fwd.cfg, model_rev.cfg
    if f.src_vocab != r.tgt_vocab or f.tgt_vocab != r.src_vocab:
        raise UsageError("models are not opposite directions of one language pair "
                         f"(fwd {f.src_vocab}->{f.tgt_vocab}, rev {r.src_vocab}->{r.tgt_vocab})")
    if f.layers != r.layers:
        raise UsageError("forward and reverse models have different depths")


def select_layers(model_fwd: Transformer, model_rev: Transformer, pairs: Sequence[ParallelPair],
                  method: str = "shift", batch_size: int = 64) -> LayerSelection:
    check_directions(model_fwd, model_rev)
    if not pairs:
        raise UsageError("layer selection needs a non-empty validation set")
    fwd = attention_stacks(model_fwd, [(p.src, p.tgt) for p in pairs], batch_size)
    rev = attention_stacks(model_rev, [(p.tgt, p.src) for p in pairs], batch_size)
    M, Msw = agreement_matrices(induce_all_layers(fwd, method), induce_all_layers(rev, method))
    i, j = argmin_cell(M)
    return LayerSelection(i, j, M, Msw)
