"""Word and character embedding tables with out-of-vocabulary fallbacks.

Word lookup resolves exact form, then lowercase, then the reserved UNK row;
social-media casing is too noisy to trust. Rows loaded from a pre-trained
vector file stay trainable. Random rows (UNK included) are drawn from
uniform(-0.25, 0.25) under the caller's generator.
"""

from __future__ import annotations

import logging

import numpy as np

from .tensor import Parameter, Tensor, take_row

logger = logging.getLogger(__name__)

UNK = "<unk>"
INIT_RANGE = 0.25


class EmbeddingError(ValueError):
    pass


class WordTable:
    """word -> trainable row of a [|V|+1, d_w] matrix; row 0 is UNK."""

    def __init__(self, words, dim: int, rng: np.random.Generator, vectors=None, name="word_emb"):
        self.dim = dim
        self.vocabulary: dict[str, int] = {}
        rows = [rng.uniform(-INIT_RANGE, INIT_RANGE, dim)]  # UNK
        for word in words:
            if word in self.vocabulary:
                continue
            self.vocabulary[word] = len(rows)
            if vectors is not None and word in vectors:
                rows.append(np.asarray(vectors[word], dtype=np.float64))
            else:
                rows.append(rng.uniform(-INIT_RANGE, INIT_RANGE, dim))
        self.matrix = Parameter(np.stack(rows), name)

    @property
    def words(self) -> list[str]:
        return list(self.vocabulary)

    def lookup_index(self, token: str) -> int:
        idx = self.vocabulary.get(token)
        if idx is not None:
            return idx
        idx = self.vocabulary.get(token.lower())
        if idx is not None:
            return idx
        return 0

    def embed(self, token: str) -> Tensor:
        return take_row(self.matrix, self.lookup_index(token))


def load_word_vectors(path, rng: np.random.Generator, name="word_emb") -> WordTable:
    """Build a WordTable from a textual vector file.

    Format: first line `<vocab_size> <dim>`, then `<word> <dim floats>` per
    line. Duplicate words keep the last occurrence (with a warning).
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"line 1: expected '<vocab_size> <dim>' header, got {header!r}")
        declared, dim = int(header[0]), int(header[1])
        vectors: dict[str, np.ndarray] = {}
        for lineno, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            parts = raw.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise EmbeddingError(
                    f"line {lineno}: expected {dim} values for {parts[0]!r}, got {len(parts) - 1}"
                )
            word = parts[0]
            if word in vectors:
                logger.warning("duplicate vector for %r; keeping the last", word)
            vectors[word] = np.array([float(x) for x in parts[1:]])
    if len(vectors) != declared:
        logger.warning("vector file declared %d words but contains %d", declared, len(vectors))
    return WordTable(list(vectors), dim, rng, vectors=vectors, name=name)


class CharTable:
    """character -> trainable row of a [|A|+1, d_ce] matrix; row 0 is UNK."""

    def __init__(self, alphabet, dim: int, rng: np.random.Generator, name="char_emb"):
        self.dim = dim
        self.alphabet: dict[str, int] = {}
        for ch in alphabet:
            if ch not in self.alphabet:
                self.alphabet[ch] = len(self.alphabet) + 1
        size = len(self.alphabet) + 1
        self.matrix = Parameter(rng.uniform(-INIT_RANGE, INIT_RANGE, (size, dim)), name)

    @property
    def chars(self) -> list[str]:
        return list(self.alphabet)

    def lookup_index(self, ch: str) -> int:
        return self.alphabet.get(ch, 0)

    def embed_chars(self, token: str) -> list[Tensor]:
        if not token:
            raise EmbeddingError("cannot embed an empty token")
        return [take_row(self.matrix, self.lookup_index(ch)) for ch in token]


def collect_vocab(posts) -> tuple[list[str], list[str]]:
    """Word list and character alphabet of a corpus, in first-seen order.

    Hashtag bodies contribute characters too, so segmenter-split hashtag
    words map onto the same character inventory.
    """
    words: dict[str, None] = {}
    chars: dict[str, None] = {}
    for post in posts:
        for tok in post.tokens:
            words.setdefault(tok, None)
            for ch in tok:
                chars.setdefault(ch, None)
        for tag_body in post.hashtags:
            for ch in tag_body:
                chars.setdefault(ch, None)
    return list(words), list(chars)
