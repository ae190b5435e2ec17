"""Pre-norm encoder-decoder Transformer with cross-attention capture.

Decoder position ``i`` (1-based, ``i = 1..|y|+1``) reads input token
``y_{i-1}`` (``y_0 = <bos>``) and predicts ``y_i`` (``y_{|y|+1} = <eos>``).
Every forward pass records, per decoder layer, the head-averaged
cross-attention weights; row ``i`` of layer ``l`` is ``W^l_i``.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import BOS, EOS, PAD
from .errors import FormatError, UsageError
from .tensor import Tensor

NEG_INF = -1e9


@dataclass(frozen=True)
class TransformerConfig:
    src_vocab: int
    tgt_vocab: int
    layers: int = 4
    heads: int = 4
    d_model: int = 64
    d_ff: int = 256
    dropout: float = 0.1
    max_positions: int = 256

    def __post_init__(self):
        if self.d_model % self.heads:
            raise UsageError(f"d_model={self.d_model} not divisible by heads={self.heads}")
        if self.layers < 1:
            raise UsageError("need at least one layer")

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads


@dataclass
class AttentionStack:
    """Per-decoder-layer captures for one sentence pair.

    ``weights[l-1]`` is ``W^l`` with one row per decoder position and one
    column per source word. ``queries``/``states`` hold the cross-attention
    query input and the layer output at each position, when captured.
    """

    weights: list[np.ndarray]
    queries: list[np.ndarray] | None = None
    states: list[np.ndarray] | None = None
    memory: np.ndarray | None = None

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def layer(self, l: int) -> np.ndarray:
        if not 1 <= l <= self.num_layers:
            raise UsageError(f"layer {l} out of range [1, {self.num_layers}]")
        return self.weights[l - 1]

    def drop_first_row(self) -> "AttentionStack":
        """Shift every ``W^l`` up one row, keeping the row count.

        The vacated last row is filled with uniform weights. NAIVE scores of
        the result equal SHIFT scores of the original.
        """
        out = []
        for w in self.weights:
            pad = np.full((1, w.shape[1]), 1.0 / w.shape[1], dtype=w.dtype)
            out.append(np.concatenate([w[1:], pad]))
        return AttentionStack(out)


@dataclass
class Capture:
    weights: list[np.ndarray]
    queries: list[np.ndarray] | None
    states: list[np.ndarray] | None
    memory: np.ndarray


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    rate = np.exp(np.arange(0, d, 2) * -(math.log(10000.0) / d))
    pe = np.zeros((n, d), dtype=np.float32)
    pe[:, 0::2] = np.sin(pos * rate)
    pe[:, 1::2] = np.cos(pos * rate[: d // 2])
    return pe


def pad_batch(seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
    return ids, ids != PAD


class Transformer:
    def __init__(self, cfg: TransformerConfig, seed: int = 0):
        self.cfg = cfg
        self.pe = sinusoidal_positions(cfg.max_positions, cfg.d_model)
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        rng = np.random.default_rng(seed)
        D = cfg.d_model
        self._embed("src_embed", cfg.src_vocab, rng)
        self._embed("tgt_embed", cfg.tgt_vocab, rng)
        for l in range(1, cfg.layers + 1):
            self._norm(f"enc.{l}.ln1")
            self._attn(f"enc.{l}.self", rng)
            self._norm(f"enc.{l}.ln2")
            self._ffn(f"enc.{l}.ff", rng)
        self._norm("enc.ln")
        for l in range(1, cfg.layers + 1):
            self._norm(f"dec.{l}.ln1")
            self._attn(f"dec.{l}.self", rng)
            self._norm(f"dec.{l}.ln2")
            self._attn(f"dec.{l}.cross", rng)
            self._norm(f"dec.{l}.ln3")
            self._ffn(f"dec.{l}.ff", rng)
        self._norm("dec.ln")
        self._add("out.w", _xavier(rng, D, cfg.tgt_vocab))
        self._add("out.b", np.zeros(cfg.tgt_vocab))

    # ------------------------------------------------------------ parameters
    def _add(self, name: str, value: np.ndarray) -> None:
        self.params[name] = Tensor(value, requires_grad=True)

    def _embed(self, name, vocab, rng):
        self._add(name, rng.normal(0.0, self.cfg.d_model ** -0.5, size=(vocab, self.cfg.d_model)))

    def _norm(self, name):
        self._add(f"{name}.g", np.ones(self.cfg.d_model))
        self._add(f"{name}.b", np.zeros(self.cfg.d_model))

    def _attn(self, name, rng):
        D = self.cfg.d_model
        for p in "qkvo":
            self._add(f"{name}.w{p}", _xavier(rng, D, D))
            self._add(f"{name}.b{p}", np.zeros(D))

    def _ffn(self, name, rng):
        D, F = self.cfg.d_model, self.cfg.d_ff
        self._add(f"{name}.w1", _xavier(rng, D, F))
        self._add(f"{name}.b1", np.zeros(F))
        self._add(f"{name}.w2", _xavier(rng, F, D))
        self._add(f"{name}.b2", np.zeros(D))

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def state_arrays(self) -> OrderedDict[str, np.ndarray]:
        return OrderedDict((k, v.data) for k, v in self.params.items())

    # ------------------------------------------------------------ blocks
    def _ln(self, x: Tensor, name: str) -> Tensor:
        p = self.params
        return T.layer_norm(x, p[f"{name}.g"], p[f"{name}.b"])

    def _linear(self, x: Tensor, w: str, b: str) -> Tensor:
        return T.matmul(x, self.params[w]) + self.params[b]

    def _heads(self, x: Tensor) -> Tensor:
        B, L, _ = x.shape
        H = self.cfg.heads
        return x.reshape(B, L, H, self.cfg.d_k).transpose(0, 2, 1, 3)

    def _attention(self, name: str, q_in: Tensor, kv_in: Tensor, mask: np.ndarray) -> tuple[Tensor, Tensor]:
        """Multi-head attention; returns the output and the (B, H, Tq, Tk) weights."""
        B, Tq, D = q_in.shape
        q = self._heads(self._linear(q_in, f"{name}.wq", f"{name}.bq"))
        k = self._heads(self._linear(kv_in, f"{name}.wk", f"{name}.bk"))
        v = self._heads(self._linear(kv_in, f"{name}.wv", f"{name}.bv"))
        scores = T.matmul(q, T.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(self.cfg.d_k))
        probs = T.softmax(scores + Tensor(mask), axis=-1)
        ctx = T.matmul(probs, v).transpose(0, 2, 1, 3).reshape(B, Tq, D)
        return self._linear(ctx, f"{name}.wo", f"{name}.bo"), probs

    def _ffn_block(self, x: Tensor, name: str) -> Tensor:
        h = T.relu(self._linear(x, f"{name}.w1", f"{name}.b1"))
        return self._linear(h, f"{name}.w2", f"{name}.b2")

    def _embed_tokens(self, table: str, ids: np.ndarray) -> Tensor:
        L = ids.shape[1]
        if L > self.cfg.max_positions:
            raise UsageError(f"sequence of {L} tokens exceeds max_positions={self.cfg.max_positions}")
        x = T.embedding(self.params[table], ids) * math.sqrt(self.cfg.d_model)
        return x + Tensor(self.pe[:L])

    # ------------------------------------------------------------ passes
    def encode_batch(self, src: np.ndarray, src_mask: np.ndarray, *, training: bool = False,
                     rng: np.random.Generator | None = None) -> Tensor:
        p = self.cfg.dropout
        key_mask = np.where(src_mask, 0.0, NEG_INF).astype(np.float32)[:, None, None, :]
        x = T.dropout(self._embed_tokens("src_embed", src), p, rng, training)
        for l in range(1, self.cfg.layers + 1):
            y = self._ln(x, f"enc.{l}.ln1")
            a, _ = self._attention(f"enc.{l}.self", y, y, key_mask)
            x = x + T.dropout(a, p, rng, training)
            f = self._ffn_block(self._ln(x, f"enc.{l}.ln2"), f"enc.{l}.ff")
            x = x + T.dropout(f, p, rng, training)
        return self._ln(x, "enc.ln")

    def decode_batch(self, memory: Tensor, src_mask: np.ndarray, tgt_in: np.ndarray, *,
                     training: bool = False, rng: np.random.Generator | None = None,
                     capture_states: bool = False) -> tuple[Tensor, Capture]:
        p = self.cfg.dropout
        Tn = tgt_in.shape[1]
        causal = np.triu(np.full((Tn, Tn), NEG_INF, dtype=np.float32), k=1)
        key_mask = np.where(src_mask, 0.0, NEG_INF).astype(np.float32)[:, None, None, :]
        x = T.dropout(self._embed_tokens("tgt_embed", tgt_in), p, rng, training)
        weights, queries, states = [], [], []
        for l in range(1, self.cfg.layers + 1):
            y = self._ln(x, f"dec.{l}.ln1")
            a, _ = self._attention(f"dec.{l}.self", y, y, causal)
            x = x + T.dropout(a, p, rng, training)
            q_in = self._ln(x, f"dec.{l}.ln2")
            c, w = self._attention(f"dec.{l}.cross", q_in, memory, key_mask)
            weights.append(w.data.mean(axis=1))
            x = x + T.dropout(c, p, rng, training)
            f = self._ffn_block(self._ln(x, f"dec.{l}.ln3"), f"dec.{l}.ff")
            x = x + T.dropout(f, p, rng, training)
            if capture_states:
                queries.append(q_in.data)
                states.append(x.data)
        logits = self._linear(self._ln(x, "dec.ln"), "out.w", "out.b")
        cap = Capture(weights, queries if capture_states else None,
                      states if capture_states else None, memory.data)
        return logits, cap

    # ------------------------------------------------------------ persistence
    def meta(self) -> dict[str, object]:
        return {k: v for k, v in asdict(self.cfg).items()}

    def save(self, path: str | Path, extra: dict[str, object] | None = None) -> None:
        meta = {"kind": "transformer", **self.meta(), **(extra or {})}
        save_checkpoint(path, self.state_arrays(), meta)

    @classmethod
    def from_arrays(cls, meta: dict[str, str], arrays: dict[str, np.ndarray]) -> "Transformer":
        cfg = config_from_meta(meta)
        model = cls(cfg)
        for name, t in model.params.items():
            if name not in arrays:
                raise FormatError(f"checkpoint lacks tensor {name}")
            if arrays[name].shape != t.shape:
                raise FormatError(f"tensor {name}: shape {arrays[name].shape}, expected {t.shape}")
            t.data = arrays[name].copy()
        return model

    @classmethod
    def load(cls, path: str | Path) -> "Transformer":
        meta, arrays = load_checkpoint(path)
        return cls.from_arrays(meta, arrays)


def config_from_meta(meta: dict[str, str]) -> TransformerConfig:
    kwargs = {}
    for f in fields(TransformerConfig):
        if f.name not in meta:
            raise FormatError(f"checkpoint manifest lacks {f.name}")
        kwargs[f.name] = float(meta[f.name]) if f.name == "dropout" else int(meta[f.name])
    return TransformerConfig(**kwargs)


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


# ---------------------------------------------------------------- sentence-level API

def _check_ids(model: Transformer, ids: Sequence[int], vocab: int, side: str) -> None:
    if len(ids) == 0:
        raise UsageError(f"empty {side} sentence")
    for i in ids:
        if not 0 <= i < vocab:
            raise IndexError(f"{side} token id {i} out of range [0, {vocab})")


def encode(model: Transformer, src: Sequence[int]) -> np.ndarray:
    """Encoder output ``h`` of shape (|x|, d_model), eval mode."""
    _check_ids(model, src, model.cfg.src_vocab, "source")
    ids, mask = pad_batch([src])
    with T.no_grad():
        return model.encode_batch(ids, mask).data[0]


def forward_teacher_forced(model: Transformer, src: Sequence[int], tgt: Sequence[int], *,
                           capture_states: bool = False) -> tuple[np.ndarray, AttentionStack]:
    """Logits of shape (|y|+1, V) and the attention stack for one pair."""
    _check_ids(model, src, model.cfg.src_vocab, "source")
    _check_ids(model, tgt, model.cfg.tgt_vocab, "target")
    logits, stacks = teacher_forced_batch(model, [(src, tgt)], capture_states=capture_states)
    return logits[0], stacks[0]


def teacher_forced_batch(model: Transformer, pairs: Sequence[tuple[Sequence[int], Sequence[int]]], *,
                         capture_states: bool = False) -> tuple[list[np.ndarray], list[AttentionStack]]:
    src_ids, src_mask = pad_batch([s for s, _ in pairs])
    tgt_in, _ = pad_batch([(BOS,) + tuple(t) for _, t in pairs])
    with T.no_grad():
        memory = model.encode_batch(src_ids, src_mask)
        logits, cap = model.decode_batch(memory, src_mask, tgt_in, capture_states=capture_states)
    out_logits, stacks = [], []
    for b, (s, t) in enumerate(pairs):
        n, m = len(t) + 1, len(s)
        out_logits.append(logits.data[b, :n])
        stacks.append(_slice_capture(cap, b, n, m))
    return out_logits, stacks


def _slice_capture(cap: Capture, b: int, n: int, m: int) -> AttentionStack:
    return AttentionStack(
        weights=[w[b, :n, :m].copy() for w in cap.weights],
        queries=[q[b, :n].copy() for q in cap.queries] if cap.queries is not None else None,
        states=[z[b, :n].copy() for z in cap.states] if cap.states is not None else None,
        memory=cap.memory[b, :m].copy(),
    )


def iter_batches(items: Sequence, size: int):
    for start in range(0, len(items), size):
        yield start, items[start:start + size]


def attention_stacks(model: Transformer, pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
                     batch_size: int = 64, capture_states: bool = False) -> list[AttentionStack]:
    out: list[AttentionStack] = []
    for _, chunk in iter_batches(list(pairs), batch_size):
        out.extend(teacher_forced_batch(model, chunk, capture_states=capture_states)[1])
    return out


class PrefixDecoder:
    """Runs the decoder on a growing prefix for one source sentence.

    Each call recomputes the full prefix, so revising earlier tokens needs no
    cache bookkeeping.
    """

    def __init__(self, model: Transformer, src: Sequence[int], capture_states: bool = False):
        _check_ids(model, src, model.cfg.src_vocab, "source")
        self.model = model
        self.src = tuple(src)
        self.capture_states = capture_states
        ids, self.mask = pad_batch([self.src])
        with T.no_grad():
            self.memory = model.encode_batch(ids, self.mask)

    def step(self, prefix: Sequence[int]) -> tuple[np.ndarray, AttentionStack]:
        """Logits for the next token after ``<bos> + prefix`` and the stack for all positions."""
        tgt_in = np.array([(BOS,) + tuple(prefix)], dtype=np.int64)
        with T.no_grad():
            logits, cap = self.model.decode_batch(self.memory, self.mask, tgt_in,
                                                  capture_states=self.capture_states)
        n = tgt_in.shape[1]
        return logits.data[0, -1], _slice_capture(cap, 0, n, len(self.src))


def greedy_decode(model: Transformer, src: Sequence[int], max_len: int) -> tuple[list[int], AttentionStack]:
    """Greedy search. Returns the tokens (without ``<eos>``) and one W row per emitted step."""
    if max_len < 1:
        raise UsageError("max_len must be >= 1")
    dec = PrefixDecoder(model, src)
    tokens: list[int] = []
    rows: list[list[np.ndarray]] = [[] for _ in range(model.cfg.layers)]
    while len(tokens) < max_len:
        logits, stack = dec.step(tokens)
        nxt = int(np.argmax(logits))
        for l, w in enumerate(stack.weights):
            rows[l].append(w[-1])
        if nxt == EOS:
            break
        tokens.append(nxt)
    return tokens, AttentionStack([np.stack(r) for r in rows])


def greedy_decode_batch(model: Transformer, srcs: Sequence[Sequence[int]], max_len: int,
                        batch_size: int = 64) -> list[list[int]]:
    """Batched greedy search used for corpus-level BLEU."""
    results: list[list[int]] = []
    for _, chunk in iter_batches(list(srcs), batch_size):
        src_ids, src_mask = pad_batch(chunk)
        with T.no_grad():
            memory = model.encode_batch(src_ids, src_mask)
            B = len(chunk)
            prefix = np.full((B, 1), BOS, dtype=np.int64)
            done = np.zeros(B, dtype=bool)
            out = [[] for _ in range(B)]
            for _ in range(max_len):
                logits, _ = model.decode_batch(memory, src_mask, prefix)
                nxt = logits.data[:, -1].argmax(axis=-1)
                for b in range(B):
                    if done[b]:
                        continue
                    if nxt[b] == EOS:
                        done[b] = True
                    else:
                        out[b].append(int(nxt[b]))
                if done.all():
                    break
                prefix = np.concatenate([prefix, np.where(done, PAD, nxt)[:, None]], axis=1)
        results.extend(out)
    return results
