"""Mini-batch SGD training with decaying learning rate, inverted dropout,
gradient accumulation, L1/L2 regularization, and best-on-dev snapshotting.

One update consumes `accumulation_steps` batches: per-post losses are raw
sequence NLLs, gradients accumulate unscaled, and the step divides by the
total token count, so k accumulated batches produce exactly the update one
batch of size k*b with a mean-per-token loss would (modulo float
associativity). Leftover accumulation flushes at the end of each epoch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .data import split_batches
from .evaluation import prf1
from .tensor import Tensor, backward, mul

logger = logging.getLogger(__name__)


class NumericError(RuntimeError):
    """A gradient went non-finite; message names the parameter."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.005
    lr_decay: float = 0.05
    batch_size: int = 10
    accumulation_steps: int = 9
    dropout: float = 0.55
    epochs: int = 20
    seed: int = 0
    l1_coeff: float = 0.0
    l2_coeff: float = 0.0
    clip_norm: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("learning_rate", "lr_decay", "l1_coeff", "l2_coeff", "clip_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def train_config_from_dict(values: dict) -> TrainConfig:
    known = {f.name for f in fields(TrainConfig)}
    return TrainConfig(**{k: v for k, v in values.items() if k in known})


class EpochStats(NamedTuple):
    epoch: int
    mean_loss: float
    dev_precision: float
    dev_recall: float
    dev_f1: float
    learning_rate: float


@dataclass
class TrainReport:
    epochs: list

    def format_table(self) -> str:
        lines = [f"{'epoch':>5} {'loss':>10} {'dev_P':>8} {'dev_R':>8} {'dev_F1':>8} {'lr':>10}"]
        for e in self.epochs:
            lines.append(
                f"{e.epoch:>5d} {e.mean_loss:>10.4f} {e.dev_precision:>8.4f}"
                f" {e.dev_recall:>8.4f} {e.dev_f1:>8.4f} {e.learning_rate:>10.6f}"
            )
        return "\n".join(lines)

    def format_csv(self) -> str:
        lines = ["epoch,mean_loss,dev_precision,dev_recall,dev_f1,learning_rate"]
        for e in self.epochs:
            lines.append(
                f"{e.epoch},{e.mean_loss:.8f},{e.dev_precision:.6f},"
                f"{e.dev_recall:.6f},{e.dev_f1:.6f},{e.learning_rate:.8f}"
            )
        return "\n".join(lines)


def dropout_mask(x: Tensor, p: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return mul(x, Tensor(keep))


def make_dropout(p: float, rng: np.random.Generator):
    """Per-vector dropout hook for the embedding outputs, or None when off."""
    if p == 0.0:
        return None
    return lambda x: dropout_mask(x, p, rng)


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """Inverse-time decay: lr / (1 + decay * epoch)."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return config.learning_rate / (1.0 + config.lr_decay * epoch)


def sgd_step(params, lr: float, l1: float = 0.0, l2: float = 0.0,
             clip_norm: float = 0.0, grad_scale: float = 1.0):
    """Clip accumulated gradients globally, update, and reset them.

    theta <- theta - lr * (g + l1 * sign(theta) + l2 * theta).
    """
    grads = []
    sq_norm = 0.0
    for p in params:
        g = p.grad * grad_scale
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in parameter {p.name!r}")
        grads.append(g)
        sq_norm += float((g * g).sum())
    factor = 1.0
    norm = np.sqrt(sq_norm)
    if clip_norm > 0.0 and norm > clip_norm:
        factor = clip_norm / norm
    for p, g in zip(params, grads):
        update = g * factor
        if l1:
            update = update + l1 * np.sign(p.data)
        if l2:
            update = update + l2 * p.data
        p.data -= lr * update
        p.zero_grad()
    return norm


def evaluate(model, posts, visual_store=None):
    """Entity-level report of the model's predictions against gold tags."""
    gold = [p.tags for p in posts]
    predicted = model.predict_corpus(posts, visual_store)
    return prf1(gold, predicted)


def train(model, train_posts, dev_posts, config: TrainConfig, visual_store=None):
    """Train in place; returns (best parameter snapshot restored, TrainReport)."""
    train_posts = list(train_posts)
    if not train_posts:
        raise ValueError("empty training set")
    if any(p.tags is None for p in train_posts):
        raise ValueError("training posts must be tagged")
    params = model.params()
    rng = np.random.default_rng(config.seed)
    report = TrainReport([])
    best_key = None
    best_snapshot = None

    for epoch in range(config.epochs):
        lr = lr_schedule(epoch, config)
        shuffle_seed = int(rng.integers(0, 2**31))
        drop = make_dropout(config.dropout, rng)
        epoch_nll = 0.0
        epoch_tokens = 0
        pending_batches = 0
        pending_tokens = 0
        for batch in split_batches(train_posts, config.batch_size, shuffle_seed):
            for post in batch:
                loss, n_tokens = model.loss(post, visual_store, drop=drop)
                backward(loss)
                pending_tokens += n_tokens
                epoch_nll += loss.item()
                epoch_tokens += n_tokens
            pending_batches += 1
            if pending_batches == config.accumulation_steps:
                sgd_step(params, lr, config.l1_coeff, config.l2_coeff,
                         config.clip_norm, grad_scale=1.0 / pending_tokens)
                pending_batches = 0
                pending_tokens = 0
        if pending_batches:
            sgd_step(params, lr, config.l1_coeff, config.l2_coeff,
                     config.clip_norm, grad_scale=1.0 / pending_tokens)

        if dev_posts:
            dev = evaluate(model, dev_posts, visual_store)
            stats = EpochStats(epoch, epoch_nll / epoch_tokens,
                               dev.precision, dev.recall, dev.f1, lr)
            # Ties on dev F1 break toward the lower training loss.
            key = (dev.f1, -stats.mean_loss)
            if best_key is None or key > best_key:
                best_key = key
                best_snapshot = {p.name: p.data.copy() for p in model.all_params()}
        else:
            stats = EpochStats(epoch, epoch_nll / epoch_tokens, 0.0, 0.0, 0.0, lr)
        report.epochs.append(stats)
        logger.info("epoch %d: loss %.4f dev F1 %.4f", epoch, stats.mean_loss, stats.dev_f1)

    if best_snapshot is not None:
        for p in model.all_params():
            p.data[:] = best_snapshot[p.name]
    return model, report
