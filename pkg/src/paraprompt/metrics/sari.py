"""SARI: scores the edits a prediction makes on its source.

For each n-gram order 1..4 the prediction's kept, deleted, and added
n-grams are compared against source and references: KEEP and ADD are
scored by F1, DELETE by precision only, following the convention of the
metric's released reference implementation (its paper and code disagree;
the code convention is the one in common use). The three operation
scores are each averaged over the four orders, then averaged together.

Division-by-empty conventions also follow the reference code (0/0 -> 0),
with one declared exception: when source, prediction, and every reference
are all identical, KEEP is 1 at every order, including orders where the
sentence is too short to have windows.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from ..textcore import TokenSeq, ngram_windows

SARI_ORDER = 4


@dataclass(frozen=True)
class SariOperationScores:
    keep: float
    delete: float
    add: float


def _f1(precision: float, recall: float) -> float:
    if precision <= 0 and recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ratio_sum(good: Counter, base: Counter) -> float:
    return sum(good[g] / base[g] for g in good)


def sari_ngram_scores(
    source_grams: Sequence[TokenSeq],
    pred_grams: Sequence[TokenSeq],
    ref_gram_lists: Sequence[Sequence[TokenSeq]],
) -> SariOperationScores:
    """KEEP/DELETE/ADD scores for one n-gram order.

    Source and prediction counts are replicated by the number of
    references so they are comparable with the pooled reference counts.
    """
    numref = len(ref_gram_lists)
    ref_counts: Counter = Counter()
    for grams in ref_gram_lists:
        ref_counts.update(grams)
    src_counts = Counter({g: c * numref for g, c in Counter(source_grams).items()})
    pred_counts = Counter({g: c * numref for g, c in Counter(pred_grams).items()})

    # KEEP: n-grams present in both source and prediction, good if also
    # in the references.
    keep = src_counts & pred_counts
    keep_good = keep & ref_counts
    keep_all = src_counts & ref_counts
    keep_precision = _ratio_sum(keep_good, keep) / len(keep) if keep else 0.0
    keep_recall = _ratio_sum(keep_good, keep_all) / len(keep_all) if keep_all else 0.0

    # DELETE: n-grams dropped from the source, good if the references
    # dropped them too. Precision only.
    deleted = src_counts - pred_counts
    del_good = deleted - ref_counts
    del_precision = _ratio_sum(del_good, deleted) / len(deleted) if deleted else 0.0

    # ADD: new n-grams in the prediction, good if any reference has them.
    # Set-based, not count-based.
    added = set(pred_counts) - set(src_counts)
    add_good = added & set(ref_counts)
    add_all = set(ref_counts) - set(src_counts)
    add_precision = len(add_good) / len(added) if added else 0.0
    add_recall = len(add_good) / len(add_all) if add_all else 0.0

    return SariOperationScores(
        keep=_f1(keep_precision, keep_recall),
        delete=del_precision,
        add=_f1(add_precision, add_recall),
    )


def sari_sentence(
    source: TokenSeq,
    prediction: TokenSeq,
    references: Sequence[TokenSeq],
) -> float:
    """Sentence SARI in [0, 1]."""
    if not references:
        raise ValueError("SARI needs at least one reference")
    identical = all(r == source for r in references) and prediction == source
    keep_total = 0.0
    del_total = 0.0
    add_total = 0.0
    for n in range(1, SARI_ORDER + 1):
        scores = sari_ngram_scores(
            ngram_windows(source, n),
            ngram_windows(prediction, n),
            [ngram_windows(r, n) for r in references],
        )
        keep = 1.0 if identical else scores.keep
        keep_total += keep
        del_total += scores.delete
        add_total += scores.add
    return (keep_total + del_total + add_total) / (3 * SARI_ORDER)


def sari_corpus(
    records: Sequence[tuple[TokenSeq, TokenSeq, Sequence[TokenSeq]]]
) -> float:
    """Mean sentence SARI x 100 over (source, prediction, references)."""
    if not records:
        raise ValueError("SARI needs a non-empty corpus")
    return 100.0 * sum(
        sari_sentence(src, pred, refs) for src, pred, refs in records
    ) / len(records)
