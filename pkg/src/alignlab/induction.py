"""Alignment scores from attention stacks, and MAP link extraction.

``S[i-1, j-1]`` scores target word ``y_i`` against source word ``x_j``.
NAIVE reads row ``i`` of ``W^l`` (the step that outputs ``y_i``); SHIFT reads
row ``i+1`` (the step that takes ``y_i`` as input).
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import AlignmentSet
from .errors import UsageError
from .transformer import AttentionStack

METHODS = ("naive", "shift")


def default_layer(method: str, num_layers: int) -> int:
    """Layer used when no selection is run: 3 for SHIFT, the penultimate for NAIVE."""
    if method == "shift":
        return min(3, num_layers)
    if method == "naive":
        return max(1, num_layers - 1)
    raise UsageError(f"unknown method {method!r}")


def _rows(W: np.ndarray, method: str) -> np.ndarray:
    if method == "naive":
        return W[:-1]
    if method == "shift":
        return W[1:]
    raise UsageError(f"unknown method {method!r}; expected one of {METHODS}")


def scores_naive(stack: AttentionStack, l: int) -> np.ndarray:
    return stack.layer(l)[:-1]


def scores_shift(stack: AttentionStack, l: int) -> np.ndarray:
    return stack.layer(l)[1:]


def scores(stack: AttentionStack, l: int, method: str) -> np.ndarray:
    return _rows(stack.layer(l), method)


def scores_layer_avg(stack: AttentionStack, method: str) -> np.ndarray:
    if stack.num_layers < 1:
        raise UsageError("empty attention stack")
    return _rows(np.mean(np.stack(stack.weights), axis=0), method)


def map_extract(S: np.ndarray) -> AlignmentSet:
    """One link per target row at the highest-scoring source column (first on ties)."""
    S = np.asarray(S)
    if S.ndim != 2 or S.size == 0:
        raise UsageError(f"score matrix must be non-empty 2-D, got shape {S.shape}")
    best = np.argmax(S, axis=1)
    return AlignmentSet.of((int(j) + 1, i + 1) for i, j in enumerate(best))


def induce(stack: AttentionStack, method: str, layer: int | None = None) -> AlignmentSet:
    """Hard alignment for one pair. ``method`` is naive, shift, naive-la or shift-la."""
    if method.endswith("-la"):
        return map_extract(scores_layer_avg(stack, method[:-3]))
    if layer is None:
        layer = default_layer(method, stack.num_layers)
    return map_extract(scores(stack, layer, method))


def induce_all_layers(stacks: Sequence[AttentionStack], method: str) -> list[list[AlignmentSet]]:
    """``out[l-1][k]`` is the alignment of pair ``k`` from layer ``l``."""
    L = stacks[0].num_layers if stacks else 0
    return [[map_extract(scores(s, l, method)) for s in stacks] for l in range(1, L + 1)]
