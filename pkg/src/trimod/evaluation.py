"""Entity-level precision/recall/F1 under BIO2, overall and per category.

A predicted span counts as correct only when its type, start, and end all
match a gold span exactly (CoNLL-style). Overall figures are micro-averaged
over all posts; per-category figures restrict both gold and predicted spans
to one entity type.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .data import ENTITY_TYPES, LABEL_INDEX


class EntitySpan(NamedTuple):
    type: str
    start: int  # inclusive token index
    end: int  # exclusive token index


def extract_spans(tags, repair: str = "lenient") -> list[EntitySpan]:
    """Maximal B-X (I-X)* runs as spans.

    An I-X with no live span of the same type is repaired as a span start in
    "lenient" mode (the CoNLL convention) and dropped in "strict" mode.
    """
    if repair not in ("lenient", "strict"):
        raise ValueError(f"repair must be 'lenient' or 'strict', got {repair!r}")
    spans = []
    open_type = None
    open_start = 0
    for i, tag in enumerate(tags):
        if tag not in LABEL_INDEX:
            raise ValueError(f"unknown tag {tag!r} at position {i}")
        if open_type is not None and (tag == "O" or tag.startswith("B-") or tag[2:] != open_type):
            spans.append(EntitySpan(open_type, open_start, i))
            open_type = None
        if tag.startswith("B-"):
            open_type, open_start = tag[2:], i
        elif tag.startswith("I-") and open_type is None and repair == "lenient":
            open_type, open_start = tag[2:], i
    if open_type is not None:
        spans.append(EntitySpan(open_type, open_start, len(tags)))
    return spans


@dataclass
class CategoryScore:
    gold: int
    predicted: int
    correct: int

    @property
    def precision(self) -> float:
        return self.correct / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.correct / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class EvalReport:
    overall: CategoryScore
    per_category: dict[str, CategoryScore]

    @property
    def precision(self) -> float:
        return self.overall.precision

    @property
    def recall(self) -> float:
        return self.overall.recall

    @property
    def f1(self) -> float:
        return self.overall.f1

    def format_table(self, per_category: bool = False) -> str:
        rows = [("overall", self.overall)]
        if per_category:
            rows += [(etype, self.per_category[etype]) for etype in ENTITY_TYPES]
        lines = [f"{'category':<10} {'prec':>8} {'recall':>8} {'f1':>8} {'gold':>6} {'pred':>6} {'corr':>6}"]
        for name, sc in rows:
            lines.append(
                f"{name:<10} {sc.precision:>8.4f} {sc.recall:>8.4f} {sc.f1:>8.4f}"
                f" {sc.gold:>6d} {sc.predicted:>6d} {sc.correct:>6d}"
            )
        return "\n".join(lines)

    def format_csv(self) -> str:
        lines = ["category,precision,recall,f1,gold,predicted,correct"]
        for name, sc in [("overall", self.overall)] + [
            (etype, self.per_category[etype]) for etype in ENTITY_TYPES
        ]:
            lines.append(
                f"{name},{sc.precision:.6f},{sc.recall:.6f},{sc.f1:.6f},"
                f"{sc.gold},{sc.predicted},{sc.correct}"
            )
        return "\n".join(lines)


def prf1(gold_tag_seqs, pred_tag_seqs, repair: str = "lenient") -> EvalReport:
    """Micro-averaged exact-match span scoring over aligned tag sequences."""
    gold_tag_seqs = list(gold_tag_seqs)
    pred_tag_seqs = list(pred_tag_seqs)
    if len(gold_tag_seqs) != len(pred_tag_seqs):
        raise ValueError(
            f"gold has {len(gold_tag_seqs)} sequences, prediction has {len(pred_tag_seqs)}"
        )
    per_category = {etype: CategoryScore(0, 0, 0) for etype in ENTITY_TYPES}
    for gold_tags, pred_tags in zip(gold_tag_seqs, pred_tag_seqs):
        if len(gold_tags) != len(pred_tags):
            raise ValueError(
                f"sequence length mismatch: gold {len(gold_tags)} vs predicted {len(pred_tags)}"
            )
        gold_spans = set(extract_spans(gold_tags, repair))
        pred_spans = set(extract_spans(pred_tags, repair))
        for span in gold_spans:
            per_category[span.type].gold += 1
        for span in pred_spans:
            per_category[span.type].predicted += 1
            if span in gold_spans:
                per_category[span.type].correct += 1
    overall = CategoryScore(
        gold=sum(c.gold for c in per_category.values()),
        predicted=sum(c.predicted for c in per_category.values()),
        correct=sum(c.correct for c in per_category.values()),
    )
    return EvalReport(overall, per_category)
