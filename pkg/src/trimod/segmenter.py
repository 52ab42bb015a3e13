"""Character-level hashtag segmentation and the pooled hashtag feature.

The segmenter embeds characters, runs a width-3 convolution and a Bi-LSTM
over the embedding sequence, and scores space/no-space after each character
from [BiLSTM state; character embedding]. A split happens wherever the
boundary probability exceeds 0.5, so the output words always concatenate
back to the input string.

A camel-case heuristic stands in when no trained model is available, and
doubles as the labeler for synthetic training data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .embeddings import CharTable
from .tensor import (
    Parameter,
    Tensor,
    add,
    at,
    backward,
    concat,
    exp,
    logsumexp,
    matmul,
    mul,
    no_grad,
    scale,
    sigmoid,
    slice1d,
    sub,
    tanh,
)


class LSTMCell:
    """Single-direction LSTM with the four gates stacked in one weight block."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator, prefix: str):
        self.input_size = input_size
        self.hidden_size = hidden_size
        h = hidden_size
        bound = 1.0 / np.sqrt(h)
        self.w = Parameter(rng.uniform(-bound, bound, (4 * h, input_size)), f"{prefix}.w")
        self.u = Parameter(rng.uniform(-bound, bound, (4 * h, h)), f"{prefix}.u")
        self.b = Parameter(np.zeros(4 * h), f"{prefix}.b")

    def params(self) -> list[Parameter]:
        return [self.w, self.u, self.b]

    def run(self, xs) -> list[Tensor]:
        h_dim = self.hidden_size
        h = Tensor(np.zeros(h_dim))
        c = Tensor(np.zeros(h_dim))
        states = []
        for x in xs:
            pre = add(add(matmul(self.w, x), matmul(self.u, h)), self.b)
            i = sigmoid(slice1d(pre, 0, h_dim))
            f = sigmoid(slice1d(pre, h_dim, 2 * h_dim))
            o = sigmoid(slice1d(pre, 2 * h_dim, 3 * h_dim))
            g = tanh(slice1d(pre, 3 * h_dim, 4 * h_dim))
            c = add(mul(f, c), mul(i, g))
            h = mul(o, tanh(c))
            states.append(h)
        return states


class SegmentationExample(NamedTuple):
    """Space-free character string with boundaries[i]=1 iff a space follows chars[i]."""

    chars: str
    boundaries: tuple


@dataclass
class SegTrainConfig:
    learning_rate: float = 0.01
    epochs: int = 20
    batch_size: int = 8
    seed: int = 0


class SegEpoch(NamedTuple):
    loss: float
    accuracy: float


class SegmenterModel:
    """CNN + Bi-LSTM boundary predictor over character embeddings."""

    def __init__(self, alphabet, rng: np.random.Generator, char_dim: int = 30,
                 conv_filters: int = 32, hidden: int = 50):
        self.char_dim = char_dim
        self.conv_filters = conv_filters
        self.hidden = hidden
        self.chars = CharTable(alphabet, char_dim, rng, name="seg.char_emb")
        bound = 1.0 / np.sqrt(3 * char_dim)
        self.conv_w = Parameter(
            rng.uniform(-bound, bound, (conv_filters, 3 * char_dim)), "seg.conv.w"
        )
        self.conv_b = Parameter(np.zeros(conv_filters), "seg.conv.b")
        lstm_in = char_dim + conv_filters
        self.fwd = LSTMCell(lstm_in, hidden, rng, "seg.lstm_fwd")
        self.bwd = LSTMCell(lstm_in, hidden, rng, "seg.lstm_bwd")
        dec_in = 2 * hidden + char_dim
        bound = 1.0 / np.sqrt(dec_in)
        self.dec_w = Parameter(rng.uniform(-bound, bound, (2, dec_in)), "seg.dec.w")
        self.dec_b = Parameter(np.zeros(2), "seg.dec.b")

    def params(self) -> list[Parameter]:
        return (
            [self.chars.matrix, self.conv_w, self.conv_b]
            + self.fwd.params()
            + self.bwd.params()
            + [self.dec_w, self.dec_b]
        )

    def boundary_logits(self, chars: str) -> list[Tensor]:
        """Per-position [no-space, space] logits."""
        if not chars:
            raise ValueError("segmenter: empty input")
        embs = self.chars.embed_chars(chars)
        pad = Tensor(np.zeros(self.char_dim))
        padded = [pad] + embs + [pad]
        conv = [
            tanh(add(matmul(self.conv_w, concat(padded[i : i + 3], axis=0)), self.conv_b))
            for i in range(len(embs))
        ]
        xs = [concat([e, c], axis=0) for e, c in zip(embs, conv)]
        fwd_states = self.fwd.run(xs)
        bwd_states = self.bwd.run(list(reversed(xs)))
        bwd_states.reverse()
        logits = []
        for emb, f, b in zip(embs, fwd_states, bwd_states):
            state = concat([f, b, emb], axis=0)
            logits.append(add(matmul(self.dec_w, state), self.dec_b))
        return logits

    def forward(self, chars: str) -> list[Tensor]:
        """Boundary probability after each character, via 2-way softmax."""
        return [
            exp(sub(at(logit, 1), logsumexp(logit))) for logit in self.boundary_logits(chars)
        ]

    def cross_entropy(self, chars: str, boundaries) -> Tensor:
        """Mean per-position cross-entropy of the gold boundaries."""
        logits = self.boundary_logits(chars)
        if len(boundaries) != len(logits):
            raise ValueError(f"{len(boundaries)} boundaries for {len(logits)} characters")
        total = None
        for logit, gold in zip(logits, boundaries):
            nll = sub(logsumexp(logit), at(logit, int(gold)))
            total = nll if total is None else add(total, nll)
        return scale(total, 1.0 / len(logits))

    def predict_boundaries(self, chars: str) -> list[int]:
        with no_grad():
            probs = self.forward(chars)
        return [1 if float(p.data) > 0.5 else 0 for p in probs]

    def segment(self, hashtag: str) -> list[str]:
        """Split after every position whose boundary probability exceeds 0.5."""
        if not hashtag:
            raise ValueError("segment: empty hashtag")
        cuts = self.predict_boundaries(hashtag)
        words = []
        start = 0
        for i, cut in enumerate(cuts[:-1]):
            if cut:
                words.append(hashtag[start : i + 1])
                start = i + 1
        words.append(hashtag[start:])
        return words


def camel_case_split(hashtag: str) -> list[str]:
    """Heuristic fallback: split before each internal uppercase letter."""
    if not hashtag:
        raise ValueError("camel_case_split: empty hashtag")
    words = []
    start = 0
    for i in range(1, len(hashtag)):
        if hashtag[i].isupper() and not hashtag[i - 1].isupper():
            words.append(hashtag[start:i])
            start = i
    words.append(hashtag[start:])
    return [w for w in words if w] or [hashtag]


def segment_hashtag(hashtag: str, model: SegmenterModel | None = None) -> list[str]:
    if model is None:
        return camel_case_split(hashtag)
    return model.segment(hashtag)


def make_synthetic_pairs(wordlist, count: int, seed: int) -> list[SegmentationExample]:
    """Concatenate 2-4 sampled words per example; boundaries mark junctions."""
    words = list(wordlist)
    if not words:
        raise ValueError("make_synthetic_pairs: empty wordlist")
    if count < 1:
        raise ValueError("make_synthetic_pairs: count must be >= 1")
    rng = np.random.default_rng(seed)
    examples = []
    for _ in range(count):
        k = int(rng.integers(2, 5))
        picks = [words[int(i)] for i in rng.integers(0, len(words), k)]
        chars = "".join(picks)
        boundaries = []
        for w in picks:
            boundaries.extend([0] * (len(w) - 1) + [1])
        boundaries[-1] = 0  # no space after the final character
        examples.append(SegmentationExample(chars, tuple(boundaries)))
    return examples


def train_segmenter(model: SegmenterModel, examples, config: SegTrainConfig | None = None):
    """Mini-batch SGD on mean per-position cross-entropy.

    Returns the per-epoch trace of (mean loss, boundary accuracy), with the
    accuracy measured on the forward passes made during that epoch.
    """
    if not examples:
        raise ValueError("train_segmenter: empty example set")
    config = config or SegTrainConfig()
    params = model.params()
    rng = np.random.default_rng(config.seed)
    trace = []
    examples = list(examples)
    for _ in range(config.epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        epoch_positions = 0
        correct = 0
        for lo in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[lo : lo + config.batch_size]]
            total = None
            positions = 0
            for ex in batch:
                logits = model.boundary_logits(ex.chars)
                for logit, gold in zip(logits, ex.boundaries):
                    nll = sub(logsumexp(logit), at(logit, int(gold)))
                    total = nll if total is None else add(total, nll)
                    predicted = 1 if logit.data[1] > logit.data[0] else 0
                    correct += int(predicted == int(gold))
                positions += len(ex.boundaries)
            loss = scale(total, 1.0 / positions)
            for p in params:
                p.zero_grad()
            backward(loss)
            for p in params:
                p.data -= config.learning_rate * p.grad
            epoch_loss += loss.item() * positions
            epoch_positions += positions
        trace.append(SegEpoch(epoch_loss / epoch_positions, correct / epoch_positions))
    return trace


def boundary_accuracy(model: SegmenterModel, examples) -> float:
    """Fraction of positions whose space/no-space call matches the gold."""
    correct = 0
    total = 0
    for ex in examples:
        predicted = model.predict_boundaries(ex.chars)
        correct += sum(int(p == g) for p, g in zip(predicted, ex.boundaries))
        total += len(ex.boundaries)
    return correct / total if total else 0.0


def hashtag_feature(post, word_table, model: SegmenterModel | None = None) -> Tensor:
    """Mean embedding of the segmented words of all hashtags in a post.

    Zero vector (of the word-embedding width) when the post has no hashtags.
    """
    words = []
    for body in post.hashtags:
        words.extend(segment_hashtag(body, model))
    if not words:
        return Tensor(np.zeros(word_table.dim))
    total = word_table.embed(words[0])
    for w in words[1:]:
        total = add(total, word_table.embed(w))
    return scale(total, 1.0 / len(words))
