"""Corpus parsing, hashtag extraction, visual-feature ingestion, statistics.

Corpus format (UTF-8): posts separated by one blank line. A post may start
with a header line `# img: <image_id>`; every other line is one token,
optionally followed by a tab and its BIO2 tag. Hashtags are any tokens whose
first character is '#'; they stay in the token sequence (and keep their tag)
and are additionally collected, '#' stripped, for the hashtag channel.

Visual feature file (UTF-8): first line `dim <d_v>`, then one line per image:
`<image_id> <v_1> ... <v_dv>`, space-separated floats.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

ENTITY_TYPES = ("PER", "LOC", "ORG", "MISC")

# Fixed label order; index positions are the CRF's emission columns.
LABELS = (
    "O",
    "B-PER",
    "I-PER",
    "B-LOC",
    "I-LOC",
    "B-ORG",
    "I-ORG",
    "B-MISC",
    "I-MISC",
)
LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}
NUM_LABELS = len(LABELS)


class CorpusError(ValueError):
    """Malformed corpus or feature file; message carries the line number."""


def is_valid_bio2(tags) -> bool:
    """True iff every I-X follows a B-X or I-X of the same type."""
    prev = "O"
    for tag in tags:
        if tag not in LABEL_INDEX:
            return False
        if tag.startswith("I-"):
            etype = tag[2:]
            if prev not in (f"B-{etype}", f"I-{etype}"):
                return False
        prev = tag
    return True


def extract_hashtags(tokens) -> list[str]:
    """Hashtag bodies ('#' stripped) of all '#'-initial tokens, in order."""
    out = []
    for tok in tokens:
        if tok.startswith("#") and len(tok) > 1:
            body = tok[1:]
            if not any(ch.isspace() for ch in body):
                out.append(body)
    return out


@dataclass
class Post:
    """One annotated social-media example."""

    tokens: list[str]
    tags: list[str] | None = None
    image_id: str | None = None
    hashtags: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.tags is not None and len(self.tags) != len(self.tokens):
            raise CorpusError(
                f"post has {len(self.tokens)} tokens but {len(self.tags)} tags"
            )
        if not self.hashtags:
            self.hashtags = extract_hashtags(self.tokens)


def parse_corpus(path) -> list[Post]:
    """Parse a corpus file into Posts; raises CorpusError with line numbers."""
    posts = []
    tokens: list[str] = []
    tags: list[str | None] = []
    image_id = None

    def flush(lineno):
        nonlocal tokens, tags, image_id
        if not tokens:
            image_id = None
            return
        tagged = [t for t in tags if t is not None]
        if tagged and len(tagged) != len(tokens):
            raise CorpusError(f"line {lineno}: post mixes tagged and untagged tokens")
        posts.append(Post(tokens, tagged if tagged else None, image_id))
        tokens, tags, image_id = [], [], None

    with open(path, encoding="utf-8") as fh:
        lineno = 0
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush(lineno)
                continue
            if line.startswith("# img:"):
                image_id = line[len("# img:"):].strip()
                continue
            cols = line.split("\t")
            tokens.append(cols[0])
            if len(cols) >= 2 and cols[1]:
                tag = cols[1]
                if tag not in LABEL_INDEX:
                    raise CorpusError(f"line {lineno}: unknown tag {tag!r}")
                tags.append(tag)
            else:
                tags.append(None)
        flush(lineno + 1)
    return posts


def format_post(post: Post) -> str:
    """Inverse of parsing: one corpus block (without the trailing blank line)."""
    lines = []
    if post.image_id is not None:
        lines.append(f"# img: {post.image_id}")
    for i, tok in enumerate(post.tokens):
        if post.tags is not None:
            lines.append(f"{tok}\t{post.tags[i]}")
        else:
            lines.append(tok)
    return "\n".join(lines)


def write_corpus(posts, path):
    with open(path, "w", encoding="utf-8") as fh:
        for post in posts:
            fh.write(format_post(post))
            fh.write("\n\n")


class VisualFeatureStore:
    """image_id -> feature vector; unknown ids resolve to zeros with a warning."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray] | None = None):
        if dim < 1:
            raise CorpusError(f"visual feature dimension must be positive, got {dim}")
        self.dim = dim
        self._vectors = dict(vectors or {})
        self._zero = np.zeros(dim)

    def __len__(self):
        return len(self._vectors)

    def __contains__(self, image_id):
        return image_id in self._vectors

    def lookup(self, image_id: str | None) -> np.ndarray:
        if image_id is None:
            return self._zero
        vec = self._vectors.get(image_id)
        if vec is None:
            logger.warning("no visual features for image id %r; using zero vector", image_id)
            return self._zero
        return vec


def load_visual_features(path) -> VisualFeatureStore:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split()
        if len(header) != 2 or header[0] != "dim":
            raise CorpusError(f"line 1: expected 'dim <d_v>' header, got {header!r}")
        dim = int(header[1])
        vectors: dict[str, np.ndarray] = {}
        for lineno, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            parts = raw.split()
            if len(parts) != dim + 1:
                raise CorpusError(
                    f"line {lineno}: expected {dim} values for {parts[0]!r}, got {len(parts) - 1}"
                )
            image_id = parts[0]
            if image_id in vectors:
                logger.warning("duplicate visual features for %r; keeping the last", image_id)
            vectors[image_id] = np.array([float(x) for x in parts[1:]])
    return VisualFeatureStore(dim, vectors)


def save_visual_features(store: VisualFeatureStore, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim {store.dim}\n")
        for image_id, vec in store._vectors.items():
            fh.write(image_id + " " + " ".join(repr(float(x)) for x in vec) + "\n")


@dataclass
class CorpusStats:
    """Entity-span counts per type, Table-1 shaped."""

    counts: dict[str, int]
    total: int
    num_posts: int

    def format_table(self) -> str:
        width = max(len(t) for t in ENTITY_TYPES)
        lines = [f"{'Type':<{width}}  Count"]
        for etype in ENTITY_TYPES:
            lines.append(f"{etype:<{width}}  {self.counts[etype]}")
        lines.append(f"{'Total':<{width}}  {self.total}")
        return "\n".join(lines)


def corpus_stats(posts) -> CorpusStats:
    from .evaluation import extract_spans

    counts = {etype: 0 for etype in ENTITY_TYPES}
    for post in posts:
        if post.tags is None:
            raise CorpusError("corpus statistics need tagged posts")
        for span in extract_spans(post.tags):
            counts[span.type] += 1
    return CorpusStats(counts, sum(counts.values()), len(posts))


def split_batches(posts, batch_size: int, seed: int) -> list[list[Post]]:
    """Deterministic shuffle under `seed`, then contiguous chunks.

    The final partial batch is kept.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    posts = list(posts)
    order = np.random.default_rng(seed).permutation(len(posts))
    shuffled = [posts[i] for i in order]
    return [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]
