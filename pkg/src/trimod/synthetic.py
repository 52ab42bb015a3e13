"""Deterministic synthetic corpora for desk-scale experiments.

Three generators:

* tagging_corpus      -- short posts with uniquely-typed entity words,
                         hashtags, and per-image visual noise vectors;
                         memorizable by a small model.
* multimodal_corpus   -- identical token sequences whose entity type is
                         decidable only from the visual feature vector.
* segmentation_words  -- a fixed 200-word dictionary for hashtag-segmenter
                         training data.
"""

from __future__ import annotations

import numpy as np

from .data import Post, VisualFeatureStore

PER_WORDS = ["alice", "bob", "carol", "dave", "erin"]
LOC_WORDS = ["paris", "tokyo", "oslo", "cairo", "lima"]
ORG_WORDS = ["leafs", "lakers", "acme", "nasa", "unesco"]
MISC_WORDS = ["olympics", "oscars", "easter", "diwali"]

_TEMPLATES = [
    # (tokens, tags) with <TYPE> placeholders filled from the lexicons
    (["<PER>", "scored", "tonight"], ["B-PER", "O", "O"]),
    (["we", "visit", "<LOC>"], ["O", "O", "B-LOC"]),
    (["<ORG>", "won", "again"], ["B-ORG", "O", "O"]),
    (["the", "<MISC>", "start"], ["O", "B-MISC", "O"]),
    (["<PER>", "<PER>", "played"], ["B-PER", "I-PER", "O"]),
    (["go", "<ORG>", "<ORG>", "go"], ["O", "B-ORG", "I-ORG", "O"]),
    (["<LOC>", "fans", "cheer"], ["B-LOC", "O", "O"]),
    (["watch", "<MISC>", "live"], ["O", "B-MISC", "O"]),
]

_HASHTAGS = ["#GameNight", "#GoalScored", "#BigWin", "#FanZone"]

_LEXICON = {"PER": PER_WORDS, "LOC": LOC_WORDS, "ORG": ORG_WORDS, "MISC": MISC_WORDS}


def tagging_corpus(n_posts: int, seed: int, visual_dim: int = 10):
    """Posts from entity templates, plus a visual store keyed per entity type.

    Entity words are unique to their type, hashtags echo the sentence theme,
    and each post carries an image whose vector clusters by entity type, so
    every channel points at the right answer.
    """
    rng = np.random.default_rng(seed)
    type_anchor = {
        etype: vec
        for etype, vec in zip(_LEXICON, np.eye(visual_dim)[: len(_LEXICON)] * 2.0)
    }
    posts = []
    vectors = {}
    for i in range(n_posts):
        tokens_t, tags = _TEMPLATES[int(rng.integers(0, len(_TEMPLATES)))]
        tokens = []
        etype = "PER"
        for tok, tag in zip(tokens_t, tags):
            if tok.startswith("<"):
                etype = tok[1:-1]
                tokens.append(_LEXICON[etype][int(rng.integers(0, len(_LEXICON[etype])))])
            else:
                tokens.append(tok)
        tags = list(tags)
        if rng.random() < 0.5:
            tokens.append(_HASHTAGS[int(rng.integers(0, len(_HASHTAGS)))])
            tags.append("O")
        image_id = f"img{i}"
        vectors[image_id] = type_anchor[etype] + rng.normal(0.0, 0.1, visual_dim)
        posts.append(Post(tokens, tags, image_id))
    return posts, VisualFeatureStore(visual_dim, vectors)


def multimodal_corpus(n_posts: int, seed: int, visual_dim: int = 8):
    """Identical text everywhere; only the image vector decides the type.

    Every post reads "the star was great" with gold B-PER / B-LOC / B-ORG
    on "star" according to the post's class, and the class is encoded
    (with mild noise) in the visual vector alone.
    """
    rng = np.random.default_rng(seed)
    classes = ["PER", "LOC", "ORG"]
    anchors = {c: np.eye(visual_dim)[k] * 3.0 for k, c in enumerate(classes)}
    posts = []
    vectors = {}
    for i in range(n_posts):
        cls = classes[i % len(classes)]
        image_id = f"mm{i}"
        vectors[image_id] = anchors[cls] + rng.normal(0.0, 0.15, visual_dim)
        posts.append(
            Post(
                ["the", "star", "was", "great"],
                ["O", f"B-{cls}", "O", "O"],
                image_id,
            )
        )
    return posts, VisualFeatureStore(visual_dim, vectors)


def segmentation_words() -> list[str]:
    """A fixed 200-word lowercase dictionary."""
    words = """
    the and for are but not you all can had her was one our out day get has him
    his how man new now old see two way who boy did its let put say she too use
    about after again air also back ball bird body book call came come dark days
    deep does done door down draw each east eyes face fact fall farm fast feet
    find fire fish five food foot form four from game gave give gold gone good
    ograph grow hand hard have head hear help here high hold home hope hour house
    idea into just keep kind king know land last late lead left life light like
    line list live long look love made make many mark mean men more most move
    much must name near need news next night nine north note noun open over page
    part past play point rain read real rest ride right river road rock room run
    said same saw school sea seem self sentence seven ship show side sing sit six
    size sleep slow small snow some song soon sound south space spell stand star
    start state stay step stop story study such sure take talk tell ten test
    """.split()
    seen = dict.fromkeys(w for w in words if w)
    out = list(seen)
    assert len(out) >= 200, f"dictionary shrank to {len(out)}"
    return out[:200]
