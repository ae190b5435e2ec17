"""Teacher-forced training with token-count batching and per-epoch checkpoints."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .corpus import BOS, EOS, PAD, ParallelPair
from .errors import NonFiniteError, UsageError
from .optim import Adam, inverse_sqrt_lr
from .transformer import Transformer, pad_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 20
    max_tokens: int = 1024
    lr: float = 5e-4
    warmup: int = 400
    label_smoothing: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.98
    seed: int = 1
    max_steps: int | None = None


@dataclass
class TrainResult:
    step_losses: list[float] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    valid_losses: list[float] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)
    steps: int = 0


@dataclass
class Batch:
    src: np.ndarray
    src_mask: np.ndarray
    tgt_in: np.ndarray
    tgt_out: np.ndarray

    @classmethod
    def from_pairs(cls, pairs: Sequence[ParallelPair]) -> "Batch":
        src, mask = pad_batch([p.src for p in pairs])
        tgt_in, _ = pad_batch([(BOS,) + tuple(p.tgt) for p in pairs])
        tgt_out, _ = pad_batch([tuple(p.tgt) + (EOS,) for p in pairs])
        return cls(src, mask, tgt_in, tgt_out)


def make_batches(pairs: Sequence[ParallelPair], max_tokens: int, rng: np.random.Generator) -> list[list[int]]:
    """Group pair indices so each batch's padded token count stays under ``max_tokens``.

    Pairs are shuffled, sorted by length inside large pools to limit padding,
    and the resulting batches are shuffled again.
    """
    order = rng.permutation(len(pairs))
    pool = max(1, 50 * max_tokens // 10)
    batches: list[list[int]] = []
    for start in range(0, len(order), pool):
        chunk = sorted(order[start:start + pool].tolist(),
                       key=lambda i: (max(len(pairs[i].src), len(pairs[i].tgt) + 1), i))
        cur: list[int] = []
        width = 0
        for i in chunk:
            w = max(width, len(pairs[i].src), len(pairs[i].tgt) + 1)
            if cur and w * (len(cur) + 1) > max_tokens:
                batches.append(cur)
                cur, w = [], max(len(pairs[i].src), len(pairs[i].tgt) + 1)
            cur.append(i)
            width = w
        if cur:
            batches.append(cur)
    perm = rng.permutation(len(batches))
    return [batches[k] for k in perm]


def batch_loss(model: Transformer, batch: Batch, label_smoothing: float, *, training: bool,
               rng: np.random.Generator | None = None) -> T.Tensor:
    memory = model.encode_batch(batch.src, batch.src_mask, training=training, rng=rng)
    logits, _ = model.decode_batch(memory, batch.src_mask, batch.tgt_in, training=training, rng=rng)
    return T.cross_entropy(logits, batch.tgt_out, label_smoothing, ignore_index=PAD)


def evaluate_loss(model: Transformer, pairs: Sequence[ParallelPair], batch_size: int = 64) -> float:
    """Token-weighted mean NLL (no smoothing) in eval mode."""
    total, count = 0.0, 0
    with T.no_grad():
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start:start + batch_size]
            batch = Batch.from_pairs(chunk)
            n = int((batch.tgt_out != PAD).sum())
            total += batch_loss(model, batch, 0.0, training=False).item() * n
            count += n
    return total / max(count, 1)


def train(model: Transformer, pairs: Sequence[ParallelPair], cfg: TrainConfig, *,
          valid: Sequence[ParallelPair] | None = None, out_dir: str | Path | None = None,
          checkpoint_meta: dict | None = None,
          on_epoch: Callable[[int, float, float | None], None] | None = None) -> TrainResult:
    """Train ``model`` in place; writes ``checkpoint_NNN.ckpt`` per epoch when ``out_dir`` is set."""
    if not pairs:
        raise UsageError("cannot train on an empty corpus")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    result = TrainResult()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        ep_total, ep_batches = 0.0, 0
        for idx in make_batches(pairs, cfg.max_tokens, rng):
            batch = Batch.from_pairs([pairs[i] for i in idx])
            opt.zero_grad()
            try:
                loss = batch_loss(model, batch, cfg.label_smoothing, training=True, rng=rng)
                T.backward(loss)
            except NonFiniteError as exc:
                raise NonFiniteError(f"training diverged at epoch {epoch}, step {step + 1}: {exc}") from exc
            step += 1
            opt.step(inverse_sqrt_lr(step, cfg.lr, cfg.warmup))
            value = loss.item()
            result.step_losses.append(value)
            ep_total += value
            ep_batches += 1
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
        result.epoch_losses.append(ep_total / max(ep_batches, 1))
        vloss = evaluate_loss(model, valid) if valid else None
        if vloss is not None:
            result.valid_losses.append(vloss)
        log.info("epoch %d steps %d train_loss %.4f valid_loss %s", epoch, step,
                 result.epoch_losses[-1], "n/a" if vloss is None else f"{vloss:.4f}")
        if out is not None:
            path = out / f"checkpoint_{epoch:03d}.ckpt"
            model.save(path, {"epoch": epoch, "step": step, **(checkpoint_meta or {})})
            result.checkpoints.append(path)
        if on_epoch is not None:
            on_epoch(epoch, result.epoch_losses[-1], vloss)
        if cfg.max_steps is not None and step >= cfg.max_steps:
            break
    result.steps = step
    return result
