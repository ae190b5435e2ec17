"""Alignment-enhanced Transformer: a value-free attention head set on a frozen base.

At decoder position ``i`` the module attends from the cross-attention query
input of layer ``l_b`` to the encoder output and averages the per-head
softmax weights. The result scores the *input* token ``y_{i-1}``, so
positions ``2..|y|+1`` give the rows for ``y_1..y_|y|``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import AlignmentSet, ParallelPair
from .errors import DimensionError, FormatError, UsageError
from .induction import map_extract
from .optim import Adam
from .tensor import Tensor
from .transformer import NEG_INF, Transformer, attention_stacks, forward_teacher_forced, pad_batch

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-9


class AetModel:
    def __init__(self, base: Transformer, layer: int, seed: int = 0, init: str = "random"):
        if not 1 <= layer <= base.cfg.layers:
            raise UsageError(f"attachment layer {layer} out of range [1, {base.cfg.layers}]")
        self.base = base
        self.layer = layer
        N, D, dk = base.cfg.heads, base.cfg.d_model, base.cfg.d_k
        if init == "random":
            rng = np.random.default_rng(seed)
            bound = math.sqrt(6.0 / (D + dk))
            key = rng.uniform(-bound, bound, size=(N, D, dk))
            query = rng.uniform(-bound, bound, size=(N, D, dk))
        elif init == "cross":
            # start from the base model's own cross-attention projections at this layer
            key = base.params[f"dec.{layer}.cross.wk"].data.reshape(D, N, dk).transpose(1, 0, 2)
            query = base.params[f"dec.{layer}.cross.wq"].data.reshape(D, N, dk).transpose(1, 0, 2)
        else:
            raise UsageError(f"unknown AET init {init!r}")
        self.key = Tensor(key, requires_grad=True)
        self.query = Tensor(query, requires_grad=True)

    def parameters(self) -> list[Tensor]:
        return [self.key, self.query]

    def num_parameters(self) -> int:
        return self.key.data.size + self.query.data.size

    def attend(self, memory: np.ndarray, queries: np.ndarray, src_mask: np.ndarray) -> Tensor:
        """Head-averaged weights (B, T, S) from memory (B, S, D) and queries (B, T, D)."""
        dk = self.base.cfg.d_k
        h = Tensor(memory[:, None])           # (B, 1, S, D)
        z = Tensor(queries[:, None])          # (B, 1, T, D)
        k = T.matmul(h, self.key)             # (B, N, S, dk)
        q = T.matmul(z, self.query)           # (B, N, T, dk)
        scores = T.matmul(q, T.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(dk))
        mask = np.where(src_mask, 0.0, NEG_INF).astype(np.float32)[:, None, None, :]
        return T.softmax(scores + Tensor(mask), axis=-1).mean(axis=1)

    def save(self, path: str | Path) -> None:
        arrays = dict(self.base.state_arrays())
        arrays["aet.key"] = self.key.data
        arrays["aet.query"] = self.query.data
        save_checkpoint(path, arrays, {"kind": "aet", **self.base.meta(), "l_b": self.layer})

    @classmethod
    def load(cls, path: str | Path) -> "AetModel":
        meta, arrays = load_checkpoint(path)
        if meta.get("kind") != "aet" or "l_b" not in meta:
            raise FormatError(f"{path} is not an AET checkpoint")
        base = Transformer.from_arrays(meta, arrays)
        m = cls(base, int(meta["l_b"]))
        N, D, dk = base.cfg.heads, base.cfg.d_model, base.cfg.d_k
        for name, t in (("aet.key", m.key), ("aet.query", m.query)):
            if name not in arrays or arrays[name].shape != (N, D, dk):
                raise FormatError(f"{path}: bad or missing tensor {name}")
            t.data = arrays[name].copy()
        return m


def normalize_reference(a: AlignmentSet, n_tgt: int, n_src: int) -> np.ndarray:
    """Rows of aligned target words spread uniformly over their sources; other rows are zero."""
    ref = np.zeros((n_tgt, n_src), dtype=np.float32)
    for s, t in a.links:
        if not (1 <= s <= n_src and 1 <= t <= n_tgt):
            raise IndexError(f"link ({s}, {t}) outside {n_src} x {n_tgt} sentence pair")
        ref[t - 1, s - 1] = 1.0
    sums = ref.sum(axis=1, keepdims=True)
    np.divide(ref, sums, out=ref, where=sums > 0)
    return ref


def aet_loss(S: Tensor, ref: np.ndarray, target_lengths: np.ndarray | None = None) -> Tensor:
    """``-(1/|y|) sum_ij ref_ij log S_ij``, averaged over the batch when S is 3-D."""
    ref = np.asarray(ref, dtype=S.dtype)
    if S.shape != ref.shape:
        raise DimensionError(f"scores {S.shape} vs reference {ref.shape}")
    if S.ndim == 2:
        weight = ref / S.shape[0]
    else:
        if target_lengths is None:
            target_lengths = np.full(S.shape[0], S.shape[1])
        weight = ref / (np.asarray(target_lengths, dtype=S.dtype)[:, None, None] * S.shape[0])
    return -(T.log(T.clamp_min(S, LOG_FLOOR)) * Tensor(weight, dtype=S.dtype)).sum()


def aet_forward(m: AetModel, src: Sequence[int], tgt: Sequence[int]) -> np.ndarray:
    """Score matrix (|y|, |x|) for one pair."""
    _, stack = forward_teacher_forced(m.base, src, tgt, capture_states=True)
    return aet_scores_from_stack(m, stack)


def aet_scores_from_stack(m: AetModel, stack, rows: slice = slice(1, None)) -> np.ndarray:
    src_mask = np.ones((1, stack.memory.shape[0]), dtype=bool)
    with T.no_grad():
        S = m.attend(stack.memory[None], stack.queries[m.layer - 1][None], src_mask)
    return S.data[0, rows]


def induce_aet(m: AetModel, src: Sequence[int], tgt: Sequence[int]) -> AlignmentSet:
    return map_extract(aet_forward(m, src, tgt))


def induce_aet_batch(m: AetModel, pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
                     batch_size: int = 64) -> list[AlignmentSet]:
    stacks = attention_stacks(m.base, pairs, batch_size, capture_states=True)
    return [map_extract(aet_scores_from_stack(m, st)) for st in stacks]


# ---------------------------------------------------------------- training

@dataclass
class AetTrainConfig:
    steps: int = 1000
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.98
    batch_size: int = 64
    seed: int = 1


@dataclass
class AetTrainResult:
    step_losses: list[float] = field(default_factory=list)


@dataclass
class _Features:
    memory: list[np.ndarray]
    queries: list[np.ndarray]
    refs: list[np.ndarray]


def _features(m: AetModel, pairs: Sequence[ParallelPair], labels: Sequence[AlignmentSet],
              batch_size: int) -> _Features:
    stacks = attention_stacks(m.base, [(p.src, p.tgt) for p in pairs], batch_size, capture_states=True)
    feats = _Features([], [], [])
    for p, st, lab in zip(pairs, stacks, labels):
        feats.memory.append(st.memory)
        feats.queries.append(st.queries[m.layer - 1])
        feats.refs.append(normalize_reference(lab, len(p.tgt), len(p.src)))
    return feats


def _batch_tensors(feats: _Features, idx: Sequence[int]):
    S = max(feats.memory[i].shape[0] for i in idx)
    Tn = max(feats.queries[i].shape[0] for i in idx)
    D = feats.memory[idx[0]].shape[1]
    B = len(idx)
    mem = np.zeros((B, S, D), dtype=np.float32)
    qry = np.zeros((B, Tn, D), dtype=np.float32)
    ref = np.zeros((B, Tn - 1, S), dtype=np.float32)
    mask = np.zeros((B, S), dtype=bool)
    lengths = np.zeros(B)
    for b, i in enumerate(idx):
        s, t = feats.memory[i].shape[0], feats.queries[i].shape[0]
        mem[b, :s] = feats.memory[i]
        qry[b, :t] = feats.queries[i]
        ref[b, : t - 1, :s] = feats.refs[i]
        mask[b, :s] = True
        lengths[b] = t - 1
    return mem, qry, ref, mask, lengths


def train_aet(m: AetModel, pairs: Sequence[ParallelPair], labels: Sequence[AlignmentSet],
              cfg: AetTrainConfig) -> AetTrainResult:
    """Fit the alignment projections; the base model is only read, never updated."""
    if len(pairs) != len(labels):
        raise UsageError(f"{len(pairs)} sentence pairs but {len(labels)} label sets")
    if not pairs:
        raise UsageError("cannot train the alignment module on an empty corpus")
    feats = _features(m, pairs, labels, cfg.batch_size)
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(m.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    result = AetTrainResult()
    order: list[int] = []
    for step in range(1, cfg.steps + 1):
        if len(order) < cfg.batch_size:
            order.extend(rng.permutation(len(pairs)).tolist())
        idx, order = order[: cfg.batch_size], order[cfg.batch_size:]
        mem, qry, ref, mask, lengths = _batch_tensors(feats, idx)
        opt.zero_grad()
        S = m.attend(mem, qry, mask)[:, 1:, :]
        loss = aet_loss(S, ref, lengths)
        T.backward(loss)
        opt.step()
        result.step_losses.append(loss.item())
        if step % 200 == 0:
            log.info("aet step %d loss %.4f", step, float(np.mean(result.step_losses[-200:])))
    return result
