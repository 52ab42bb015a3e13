"""Attention-weighted fusion of per-token text features with post-level
visual and hashtag features.

Each modality vector is projected to the shared fused dimension, scored by
exp(u . tanh(projected)), and the projected vectors are averaged under the
normalized scores. Normalization happens in log space with the max score
subtracted, and both the normalizer and the weighted sum accumulate in
score-sorted order so the result is invariant to permuting the feature list.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    Parameter,
    Tensor,
    add,
    affine,
    dot,
    exp,
    log,
    shift,
    smul,
    sub,
    tanh,
)


@dataclass
class FusedToken:
    """Fused vector plus the normalized attention weight per modality."""

    vector: Tensor
    weights: np.ndarray  # one positive weight per modality, summing to 1


def attention_weights(scores) -> list[Tensor]:
    """Normalized exp-weights of scalar score tensors, gradient-carrying."""
    if not scores:
        raise ValueError("attention_weights: needs at least one score")
    values = [float(s.data.reshape(())) for s in scores]
    top = max(values)
    exps = [exp(shift(s, -top)) for s in scores]
    order = np.argsort(values, kind="stable")
    denom = exps[order[0]]
    for i in order[1:]:
        denom = add(denom, exps[i])
    log_denom = log(denom)
    return [exp(sub(shift(s, -top), log_denom)) for s in scores]


class AttentionFusion:
    """Per-modality projections plus the shared scoring vector."""

    def __init__(self, modalities, fused_dim: int, rng: np.random.Generator,
                 prefix: str = "fusion"):
        """modalities: ordered (name, input_dim) pairs, e.g. text/visual/hashtag."""
        self.fused_dim = fused_dim
        self.modalities = tuple((name, int(dim)) for name, dim in modalities)
        if not self.modalities:
            raise ValueError("AttentionFusion: needs at least one modality")
        self.proj = {}
        for name, dim in self.modalities:
            bound = 1.0 / np.sqrt(dim)
            self.proj[name] = (
                Parameter(rng.uniform(-bound, bound, (fused_dim, dim)), f"{prefix}.{name}.w"),
                Parameter(np.zeros(fused_dim), f"{prefix}.{name}.b"),
            )
        bound = 1.0 / np.sqrt(fused_dim)
        self.u = Parameter(rng.uniform(-bound, bound, fused_dim), f"{prefix}.u")

    def params(self) -> list[Parameter]:
        out = []
        for name, _ in self.modalities:
            out.extend(self.proj[name])
        out.append(self.u)
        return out

    def fuse(self, features) -> FusedToken:
        """Fuse one feature vector per modality, in declaration order."""
        features = list(features)
        if len(features) != len(self.modalities):
            raise ValueError(
                f"got {len(features)} features for {len(self.modalities)} modalities"
            )
        projected = []
        for (name, dim), feat in zip(self.modalities, features):
            if feat.data.shape != (dim,):
                raise ValueError(
                    f"modality {name!r} expects shape ({dim},), got {feat.data.shape}"
                )
            w, b = self.proj[name]
            projected.append(affine(w, feat, b))
        scores = [dot(self.u, tanh(fp)) for fp in projected]
        weights = attention_weights(scores)

        order = np.argsort([float(s.data.reshape(())) for s in scores], kind="stable")
        fused = smul(weights[order[0]], projected[order[0]])
        for i in order[1:]:
            fused = add(fused, smul(weights[i], projected[i]))
        return FusedToken(fused, np.array([float(w.data.reshape(())) for w in weights]))

    def fuse_post(self, text_features, post_features: dict) -> list[FusedToken]:
        """Fuse every token's text feature with the post-level modality vectors.

        post_features maps the non-text modality names to their (constant)
        vectors; absent modalities must still be present as zero vectors.
        """
        fused = []
        for h in text_features:
            feats = []
            for name, _ in self.modalities:
                feats.append(h if name == "text" else post_features[name])
            fused.append(self.fuse(feats))
        return fused
