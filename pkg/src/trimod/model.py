"""The full tagger: encoders, hashtag channel, fusion, emissions, CRF.

TriModTagger owns every parameter of the network. The sequence-labeling
loss flows through the text encoder, the hashtag word embeddings, the
fusion projections, the emission head, and the CRF transitions. The
segmenter's own parameters are trained separately on boundary supervision
(its segmentation decisions are discrete, so no NER gradient reaches it).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .crf import EmissionHead, LinearChainCRF
from .data import LABEL_INDEX, LABELS, Post, VisualFeatureStore
from .embeddings import CharTable, WordTable, collect_vocab
from .encoders import TextEncoder
from .fusion import AttentionFusion
from .segmenter import SegmenterModel, hashtag_feature, segment_hashtag
from .tensor import Tensor, no_grad

MODALITIES = ("text", "visual", "hashtag")


@dataclass
class ModelConfig:
    """Architecture hyperparameters; the Table-style defaults."""

    word_dim: int = 200
    char_dim: int = 30
    char_hidden: int = 30
    word_hidden: int = 150
    fused_dim: int = 300
    visual_dim: int = 10
    seg_char_dim: int = 30
    seg_conv_filters: int = 32
    seg_hidden: int = 50
    modalities: tuple = MODALITIES
    constrain_bio2: bool = True
    use_neural_segmenter: bool = False
    seed: int = 0

    def __post_init__(self):
        self.modalities = tuple(self.modalities)
        for m in self.modalities:
            if m not in MODALITIES:
                raise ValueError(f"unknown modality {m!r}")
        if "text" not in self.modalities:
            raise ValueError("the text modality is mandatory")


def config_from_dict(values: dict) -> ModelConfig:
    known = {f.name for f in fields(ModelConfig)}
    kwargs = {}
    for key, val in values.items():
        if key in known:
            kwargs[key] = val
    return ModelConfig(**kwargs)


def corpus_vocabulary(posts, segmenter_model=None):
    """Word list and character alphabet covering tokens and hashtag words.

    Hashtag bodies are segmented (heuristically unless a trained segmenter
    is given) so the pooled hashtag feature resolves to real table rows
    rather than UNK.
    """
    words, chars = collect_vocab(posts)
    seen = dict.fromkeys(words)
    for post in posts:
        for body in post.hashtags:
            for word in segment_hashtag(body, segmenter_model):
                seen.setdefault(word.lower(), None)
    return list(seen), chars


class TriModTagger:
    """Tri-modality sequence tagger over a fixed vocabulary and alphabet."""

    def __init__(self, config: ModelConfig, words, alphabet, word_vector_table: WordTable | None = None,
                 seg_alphabet=None):
        self.config = config
        rng = np.random.default_rng(config.seed)
        if word_vector_table is not None:
            self.word_table = word_vector_table
            if word_vector_table.dim != config.word_dim:
                raise ValueError(
                    f"word vectors are {word_vector_table.dim}-dimensional, "
                    f"config says {config.word_dim}"
                )
        else:
            self.word_table = WordTable(words, config.word_dim, rng)
        self.char_table = CharTable(alphabet, config.char_dim, rng)
        self.encoder = TextEncoder(
            self.word_table, self.char_table, config.char_hidden, config.word_hidden, rng
        )
        dims = {
            "text": 2 * config.word_hidden,
            "visual": config.visual_dim,
            "hashtag": config.word_dim,
        }
        self.fusion = AttentionFusion(
            [(name, dims[name]) for name in config.modalities], config.fused_dim, rng
        )
        self.emission_head = EmissionHead(config.fused_dim, rng)
        self.crf = LinearChainCRF(rng, constrain_bio2=config.constrain_bio2)
        self.segmenter = SegmenterModel(
            seg_alphabet if seg_alphabet is not None else alphabet,
            rng,
            char_dim=config.seg_char_dim,
            conv_filters=config.seg_conv_filters,
            hidden=config.seg_hidden,
        )

    # -- parameter inventory ------------------------------------------------

    def params(self):
        """Parameters updated by the sequence-labeling objective."""
        return (
            self.encoder.params()
            + self.fusion.params()
            + self.emission_head.params()
            + self.crf.params()
        )

    def all_params(self):
        """Everything in the bundle, segmenter included."""
        out = self.params() + self.segmenter.params()
        names = [p.name for p in out]
        assert len(names) == len(set(names)), "duplicate parameter names"
        return out

    # -- forward paths ------------------------------------------------------

    def _segmenter_or_none(self):
        return self.segmenter if self.config.use_neural_segmenter else None

    def _post_features(self, post: Post, visual_store: VisualFeatureStore | None):
        feats = {}
        if "visual" in self.config.modalities:
            if visual_store is not None:
                vec = visual_store.lookup(post.image_id)
                if vec.shape[0] != self.config.visual_dim:
                    raise ValueError(
                        f"visual store dimension {vec.shape[0]} != config {self.config.visual_dim}"
                    )
            else:
                vec = np.zeros(self.config.visual_dim)
            feats["visual"] = Tensor(vec)
        if "hashtag" in self.config.modalities:
            feats["hashtag"] = hashtag_feature(post, self.word_table, self._segmenter_or_none())
        return feats

    def fused_tokens(self, post: Post, visual_store=None, drop=None):
        gt = self.encoder.sentence_encode(post.tokens, drop)
        return self.fusion.fuse_post(gt, self._post_features(post, visual_store))

    def emissions(self, post: Post, visual_store=None, drop=None):
        fused = self.fused_tokens(post, visual_store, drop)
        return self.emission_head.emissions([f.vector for f in fused]), fused

    def loss(self, post: Post, visual_store=None, drop=None):
        """CRF negative log-likelihood of the gold tags; also token count."""
        if post.tags is None:
            raise ValueError("cannot compute a loss for an untagged post")
        emissions, _ = self.emissions(post, visual_store, drop)
        gold = [LABEL_INDEX[t] for t in post.tags]
        return self.crf.nll_loss(emissions, gold), len(post.tokens)

    def predict(self, post: Post, visual_store=None, explain: bool = False):
        """Viterbi tags; optionally the per-token fusion attention weights."""
        with no_grad():
            emissions, fused = self.emissions(post, visual_store)
            path, _ = self.crf.viterbi_decode(emissions)
        tags = [LABELS[i] for i in path]
        if explain:
            return tags, [f.weights for f in fused]
        return tags

    def predict_corpus(self, posts, visual_store=None):
        return [self.predict(post, visual_store) for post in posts]
