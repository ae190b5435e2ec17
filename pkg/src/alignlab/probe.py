"""Identifiability probe for decoder hidden states.

A projection maps the layer-``l`` state at each decoder position into the
target embedding space. The token is *identified* when the nearest embedding
among the sentence's own tokens sits at the expected position: the input token
``y_{i-1}`` in ``input`` mode, the output token ``y_i`` in ``output`` mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .corpus import BOS, EOS
from .errors import UsageError
from .optim import Adam
from .tensor import Tensor
from .transformer import Transformer, attention_stacks

KINDS = ("naive", "linear", "mlp")
MODES = ("input", "output")


@dataclass
class ProbeConfig:
    steps: int = 2000
    lr: float = 1e-3
    batch_size: int = 256
    fit_fraction: float = 0.9
    seed: int = 0


class Projection:
    def __init__(self, kind: str, d_in: int, d_out: int, hidden: int | None = None, seed: int = 0):
        if kind not in KINDS:
            raise UsageError(f"unknown projection kind {kind!r}; expected one of {KINDS}")
        if kind == "naive" and d_in != d_out:
            raise UsageError("identity projection needs matching dimensions")
        self.kind = kind
        rng = np.random.default_rng(seed)
        self.params: list[Tensor] = []
        if kind == "linear":
            self.params = [Tensor(_xavier(rng, d_in, d_out), requires_grad=True),
                           Tensor(np.zeros(d_out), requires_grad=True)]
        elif kind == "mlp":
            h = hidden or d_out
            self.params = [Tensor(_xavier(rng, d_in, h), requires_grad=True),
                           Tensor(np.zeros(h), requires_grad=True),
                           Tensor(_xavier(rng, h, d_out), requires_grad=True),
                           Tensor(np.zeros(d_out), requires_grad=True)]

    def forward(self, z: Tensor) -> Tensor:
        if self.kind == "naive":
            return z
        if self.kind == "linear":
            w, b = self.params
            return T.matmul(z, w) + b
        w1, b1, w2, b2 = self.params
        return T.matmul(T.relu(T.matmul(z, w1) + b1), w2) + b2

    def __call__(self, z: np.ndarray) -> np.ndarray:
        with T.no_grad():
            return self.forward(Tensor(np.asarray(z, dtype=np.float32))).data


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def fit_projection(inputs: np.ndarray, targets: np.ndarray, kind: str,
                   cfg: ProbeConfig | None = None) -> tuple[Projection, list[float]]:
    """Fit by mean squared error with Adam. Returns the projection and per-step losses."""
    cfg = cfg or ProbeConfig()
    inputs = np.asarray(inputs, dtype=np.float32)
    targets = np.asarray(targets, dtype=np.float32)
    if len(inputs) == 0:
        raise UsageError("no states to fit a projection on")
    if len(inputs) != len(targets):
        raise UsageError(f"{len(inputs)} inputs but {len(targets)} targets")
    proj = Projection(kind, inputs.shape[1], targets.shape[1], seed=cfg.seed)
    losses: list[float] = []
    if kind == "naive":
        return proj, losses
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(proj.params, lr=cfg.lr)
    n = len(inputs)
    for _ in range(cfg.steps):
        idx = rng.choice(n, size=min(cfg.batch_size, n), replace=False)
        opt.zero_grad()
        diff = proj.forward(Tensor(inputs[idx])) - Tensor(targets[idx])
        loss = (diff * diff).mean()
        T.backward(loss)
        opt.step()
        losses.append(loss.item())
    return proj, losses


@dataclass
class _Positions:
    states: np.ndarray        # (P, D)
    sentence: np.ndarray      # (P,) index into the candidate lists
    row: np.ndarray           # (P,) 0-based decoder position


def _collect(model: Transformer, pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
             layer: int) -> tuple[_Positions, list[np.ndarray]]:
    stacks = attention_stacks(model, pairs, capture_states=True)
    states, sent, rows, cands = [], [], [], []
    for k, ((_, tgt), st) in enumerate(zip(pairs, stacks)):
        z = st.states[layer - 1]
        states.append(z)
        sent.extend([k] * len(z))
        rows.extend(range(len(z)))
        cands.append(np.array((BOS,) + tuple(tgt) + (EOS,)))
    return _Positions(np.concatenate(states), np.array(sent), np.array(rows)), cands


def nearest_position(vec: np.ndarray, candidates: np.ndarray) -> int:
    """Index of the closest candidate row; ties go to the smallest index."""
    d = ((candidates - vec) ** 2).sum(axis=1)
    return int(np.argmin(d))


def identifiability_rate(model: Transformer, pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
                         layer: int, mode: str, kind: str, cfg: ProbeConfig | None = None) -> float:
    """Share of held-out positions whose projected state recovers the expected token position."""
    cfg = cfg or ProbeConfig()
    if not 1 <= layer <= model.cfg.layers:
        raise UsageError(f"layer {layer} out of range [1, {model.cfg.layers}]")
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not pairs:
        raise UsageError("no sentence pairs to probe")
    pos, cands = _collect(model, pairs, layer)
    offset = 0 if mode == "input" else 1
    emb = model.params["tgt_embed"].data
    target_ids = np.array([cands[s][r + offset] for s, r in zip(pos.sentence, pos.row)])
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(pos.states))
    n_fit = int(round(cfg.fit_fraction * len(order)))
    if n_fit == 0 or n_fit == len(order):
        raise UsageError("not enough positions for a fit/report split")
    fit, report = order[:n_fit], order[n_fit:]
    proj, _ = fit_projection(pos.states[fit], emb[target_ids[fit]], kind, cfg)
    projected = proj(pos.states[report])
    correct = 0
    for vec, p in zip(projected, report):
        k = nearest_position(vec, emb[cands[pos.sentence[p]]])
        correct += k == pos.row[p] + offset
    return correct / len(report)
