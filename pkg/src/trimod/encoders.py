"""Recurrent text encoders: character-level Bi-GRU and sentence-level Bi-GRU.

A token is represented as [word embedding; char-BiGRU ends] and the token
sequence is contextualized by a second Bi-GRU whose per-position outputs
concatenate the forward and backward states. Gate equations are the standard
GRU: z and r through sigmoids, candidate through tanh with the reset gate
applied to the recurrent path, h' = (1-z)*h + z*cand.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    Parameter,
    Tensor,
    add,
    concat,
    matmul,
    mul,
    sigmoid,
    slice1d,
    sub,
    tanh,
)


def _init_matrix(rng, rows, cols, hidden):
    bound = 1.0 / np.sqrt(hidden)
    return rng.uniform(-bound, bound, (rows, cols))


class GRUCell:
    """Single-direction GRU; weights for input and recurrent paths plus biases."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator, prefix: str):
        self.input_size = input_size
        self.hidden_size = hidden_size
        h = hidden_size
        self.w_z = Parameter(_init_matrix(rng, h, input_size, h), f"{prefix}.w_z")
        self.w_r = Parameter(_init_matrix(rng, h, input_size, h), f"{prefix}.w_r")
        self.w_c = Parameter(_init_matrix(rng, h, input_size, h), f"{prefix}.w_c")
        self.u_z = Parameter(_init_matrix(rng, h, h, h), f"{prefix}.u_z")
        self.u_r = Parameter(_init_matrix(rng, h, h, h), f"{prefix}.u_r")
        self.u_c = Parameter(_init_matrix(rng, h, h, h), f"{prefix}.u_c")
        self.b_z = Parameter(np.zeros(h), f"{prefix}.b_z")
        self.b_r = Parameter(np.zeros(h), f"{prefix}.b_r")
        self.b_c = Parameter(np.zeros(h), f"{prefix}.b_c")

    def params(self) -> list[Parameter]:
        return [
            self.w_z, self.w_r, self.w_c,
            self.u_z, self.u_r, self.u_c,
            self.b_z, self.b_r, self.b_c,
        ]

    def _stacked_gates(self):
        # One [2h x *] matmul per step instead of four; rebuilt per forward
        # pass because parameter data mutates between updates.
        return (
            concat([self.w_z, self.w_r], axis=0),
            concat([self.u_z, self.u_r], axis=0),
            concat([self.b_z, self.b_r], axis=0),
        )

    def step(self, x: Tensor, h_prev: Tensor, _gates=None) -> Tensor:
        wzr, uzr, bzr = _gates if _gates is not None else self._stacked_gates()
        h = self.hidden_size
        pre = add(add(matmul(wzr, x), matmul(uzr, h_prev)), bzr)
        gates = sigmoid(pre)
        z = slice1d(gates, 0, h)
        r = slice1d(gates, h, 2 * h)
        cand = tanh(add(add(matmul(self.w_c, x), matmul(self.u_c, mul(r, h_prev))), self.b_c))
        return add(h_prev, mul(z, sub(cand, h_prev)))

    def run(self, xs, h0: Tensor | None = None) -> list[Tensor]:
        """All hidden states over the sequence, starting from zeros."""
        if not xs:
            raise ValueError("GRUCell.run: empty sequence")
        h = h0 if h0 is not None else Tensor(np.zeros(self.hidden_size))
        gates = self._stacked_gates()
        states = []
        for x in xs:
            h = self.step(x, h, _gates=gates)
            states.append(h)
        return states


class BiGRU:
    """Forward and backward GRU cells over the same input size and hidden size."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator, prefix: str):
        self.hidden_size = hidden_size
        self.fwd = GRUCell(input_size, hidden_size, rng, f"{prefix}.fwd")
        self.bwd = GRUCell(input_size, hidden_size, rng, f"{prefix}.bwd")

    def params(self) -> list[Parameter]:
        return self.fwd.params() + self.bwd.params()

    def run_all(self, xs) -> list[Tensor]:
        """Per-position [forward state; backward state], each of length 2h."""
        fwd_states = self.fwd.run(xs)
        bwd_states = self.bwd.run(list(reversed(xs)))
        bwd_states.reverse()
        return [concat([f, b], axis=0) for f, b in zip(fwd_states, bwd_states)]

    def encode_ends(self, xs) -> Tensor:
        """[last forward state; backward state at position 1], length 2h."""
        fwd_states = self.fwd.run(xs)
        bwd_states = self.bwd.run(list(reversed(xs)))
        return concat([fwd_states[-1], bwd_states[-1]], axis=0)


class TextEncoder:
    """Word+char token representations contextualized by a sentence Bi-GRU."""

    def __init__(self, word_table, char_table, char_hidden: int, word_hidden: int,
                 rng: np.random.Generator):
        self.word_table = word_table
        self.char_table = char_table
        self.char_bigru = BiGRU(char_table.dim, char_hidden, rng, "char_gru")
        self.token_dim = word_table.dim + 2 * char_hidden
        self.word_bigru = BiGRU(self.token_dim, word_hidden, rng, "word_gru")
        self.output_dim = 2 * word_hidden

    def params(self) -> list[Parameter]:
        return (
            [self.word_table.matrix, self.char_table.matrix]
            + self.char_bigru.params()
            + self.word_bigru.params()
        )

    def char_encode(self, token: str, drop=None) -> Tensor:
        """Character-level token vector of length 2 * char hidden size."""
        vecs = self.char_table.embed_chars(token)
        if drop is not None:
            vecs = [drop(v) for v in vecs]
        return self.char_bigru.encode_ends(vecs)

    def token_represent(self, token: str, drop=None) -> Tensor:
        """[word embedding; char encoding], the sentence-GRU input."""
        word = self.word_table.embed(token)
        if drop is not None:
            word = drop(word)
        return concat([word, self.char_encode(token, drop)], axis=0)

    def sentence_encode(self, tokens, drop=None) -> list[Tensor]:
        """Contextual feature per token, each of length 2 * word hidden size."""
        if not tokens:
            raise ValueError("sentence_encode: empty token sequence")
        reps = [self.token_represent(tok, drop) for tok in tokens]
        return self.word_bigru.run_all(reps)
