"""Linear-chain CRF output layer: scoring, partition, loss, Viterbi.

The transition matrix covers the label set plus synthetic START and END
states, so a length-n path always contributes n+1 transition scores and n
emission scores. Structurally impossible transitions (into START, out of
END) are pinned at -10000 through a constant mask; with BIO2 constraints
enabled the same mask also pins label transitions that would produce
ill-formed spans, and no gradient reaches pinned entries.

All partition-function math runs in 64-bit log space.
"""

from __future__ import annotations

import numpy as np

from .data import LABELS
from .tensor import (
    Parameter,
    Tensor,
    add,
    add_to_rows,
    concat,
    exp,
    logsumexp,
    logsumexp_axis0,
    matmul,
    mul,
    no_grad,
    pick,
    slice1d,
    sub,
    submatrix,
    take_col,
    take_row,
)

IMPOSSIBLE = -10000.0


def bio2_transition_allowed(src: str, dst: str) -> bool:
    """Whether src -> dst keeps a BIO2 sequence well-formed.

    src/dst are label strings or the synthetic "<start>" / "<end>".
    """
    if dst == "<start>" or src == "<end>":
        return False
    if dst == "<end>" or dst == "O" or dst.startswith("B-"):
        return True
    # dst is I-X: needs a live span of the same type.
    etype = dst[2:]
    return src in (f"B-{etype}", f"I-{etype}")


class LinearChainCRF:
    """Transition parameters plus the four CRF operations over emissions."""

    def __init__(self, rng: np.random.Generator, labels=LABELS, constrain_bio2: bool = True,
                 name: str = "crf.transitions"):
        self.labels = tuple(labels)
        self.num_labels = len(self.labels)
        self.start = self.num_labels
        self.end = self.num_labels + 1
        size = self.num_labels + 2
        self.constrain_bio2 = constrain_bio2
        self.transitions = Parameter(rng.uniform(-0.1, 0.1, (size, size)), name)
        self._mask, self._penalty = self._build_mask()

    def _build_mask(self):
        size = self.num_labels + 2
        names = list(self.labels) + ["<start>", "<end>"]
        allowed = np.ones((size, size))
        for i, src in enumerate(names):
            for j, dst in enumerate(names):
                if dst == "<start>" or src == "<end>":
                    allowed[i, j] = 0.0
                elif self.constrain_bio2 and not bio2_transition_allowed(src, dst):
                    allowed[i, j] = 0.0
        penalty = (1.0 - allowed) * IMPOSSIBLE
        return Tensor(allowed), Tensor(penalty)

    def params(self) -> list[Parameter]:
        return [self.transitions]

    def effective_transitions(self) -> Tensor:
        """Transition scores with pinned entries replaced by -10000."""
        return add(mul(self.transitions, self._mask), self._penalty)

    def _check(self, emissions: Tensor, labels=None):
        n, width = emissions.data.shape
        if width != self.num_labels:
            raise ValueError(f"emissions have {width} columns, expected {self.num_labels}")
        if n < 1:
            raise ValueError("emissions must cover at least one token")
        if labels is not None:
            if len(labels) != n:
                raise ValueError(f"{len(labels)} labels for {n} tokens")
            for y in labels:
                if not 0 <= y < self.num_labels:
                    raise ValueError(f"label index {y} out of range")

    def path_score(self, emissions: Tensor, labels) -> Tensor:
        """Sum of n+1 transition scores and n emission scores for one path."""
        self._check(emissions, labels)
        t_eff = self.effective_transitions()
        n = len(labels)
        score = pick(t_eff, self.start, labels[0])
        for i in range(1, n):
            score = add(score, pick(t_eff, labels[i - 1], labels[i]))
        score = add(score, pick(t_eff, labels[n - 1], self.end))
        for i, y in enumerate(labels):
            score = add(score, pick(emissions, i, y))
        return score

    def log_partition(self, emissions: Tensor) -> Tensor:
        """Forward algorithm in log space over all label sequences."""
        self._check(emissions)
        n = emissions.data.shape[0]
        t_eff = self.effective_transitions()
        block = submatrix(t_eff, 0, self.num_labels, 0, self.num_labels)
        start_row = slice1d(take_row(t_eff, self.start), 0, self.num_labels)
        alpha = add(start_row, take_row(emissions, 0))
        for i in range(1, n):
            alpha = add(logsumexp_axis0(add_to_rows(block, alpha)), take_row(emissions, i))
        end_col = slice1d(take_col(t_eff, self.end), 0, self.num_labels)
        return logsumexp(add(alpha, end_col))

    def nll_loss(self, emissions: Tensor, labels) -> Tensor:
        """Negative log-likelihood of the gold path; non-negative."""
        return sub(self.log_partition(emissions), self.path_score(emissions, labels))

    def sequence_prob(self, emissions: Tensor, labels) -> Tensor:
        return exp(sub(self.path_score(emissions, labels), self.log_partition(emissions)))

    def viterbi_decode(self, emissions) -> tuple[list[int], float]:
        """Best-scoring label sequence via max-product dynamic programming.

        Ties break toward the lower label index (argmax returns the first).
        """
        p = emissions.data if isinstance(emissions, Tensor) else np.asarray(emissions)
        if p.ndim != 2 or p.shape[1] != self.num_labels:
            raise ValueError(f"emissions shape {p.shape} incompatible with {self.num_labels} labels")
        with no_grad():
            t_eff = self.effective_transitions().data
        n = p.shape[0]
        delta = t_eff[self.start, : self.num_labels] + p[0]
        backptr = np.zeros((n, self.num_labels), dtype=int)
        for i in range(1, n):
            scores = delta[:, None] + t_eff[: self.num_labels, : self.num_labels]
            backptr[i] = np.argmax(scores, axis=0)
            delta = scores[backptr[i], np.arange(self.num_labels)] + p[i]
        final = delta + t_eff[: self.num_labels, self.end]
        best = int(np.argmax(final))
        path = [best]
        for i in range(n - 1, 0, -1):
            best = int(backptr[i, best])
            path.append(best)
        path.reverse()
        return path, float(final.max())


class EmissionHead:
    """Affine map from fused token vectors to per-label scores (the P matrix)."""

    def __init__(self, input_dim: int, rng: np.random.Generator, num_labels: int = len(LABELS),
                 prefix: str = "emission"):
        bound = 1.0 / np.sqrt(input_dim)
        self.input_dim = input_dim
        self.num_labels = num_labels
        self.weight = Parameter(rng.uniform(-bound, bound, (num_labels, input_dim)), f"{prefix}.w")
        self.bias = Parameter(np.zeros(num_labels), f"{prefix}.b")

    def params(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def emissions(self, fused_vectors) -> Tensor:
        """Stack per-token affine scores into the [n x L] emission matrix."""
        rows = []
        for vec in fused_vectors:
            if vec.data.shape != (self.input_dim,):
                raise ValueError(
                    f"fused vector has shape {vec.data.shape}, expected ({self.input_dim},)"
                )
            rows.append(add(matmul(self.weight, vec), self.bias).reshape(1, self.num_labels))
        return concat(rows, axis=0)
