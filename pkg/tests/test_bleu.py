import math
import random

import pytest

from paraprompt.metrics import (
    bleu_corpus,
    bleu_corpus_stats,
    closest_reference_length,
    self_bleu,
)

from oracles import bleu_oracle


def test_exact_match_scores_100():
    pairs = [(("a", "b", "c", "d"), [("a", "b", "c", "d")])] * 3
    assert bleu_corpus(pairs) == 100.0


def test_hand_counted_precisions():
    # p1=4/5 p2=3/4 p3=2/3 p4=1/2, same lengths so no brevity penalty
    pairs = [(("a", "b", "c", "d", "e"), [("a", "b", "c", "d", "f")])]
    expected = 100 * math.exp(
        (math.log(4 / 5) + math.log(3 / 4) + math.log(2 / 3) + math.log(1 / 2)) / 4
    )
    assert bleu_corpus(pairs) == pytest.approx(expected)


def test_zero_overlap_scores_zero():
    pairs = [(("x", "y", "z", "w", "v"), [("a", "b", "c", "d", "e")])]
    assert bleu_corpus(pairs) == 0.0
    assert bleu_corpus_stats(pairs).zero_match_orders == [1, 2, 3, 4]


def test_zero_fourgram_match_scores_zero():
    # shared unigrams but no shared 4-gram anywhere: no smoothing, so 0
    pairs = [(("a", "b", "c", "x"), [("a", "b", "c", "y")])] * 2
    stats = bleu_corpus_stats(pairs)
    assert stats.zero_match_orders == [4]
    assert stats.score() == 0.0


def test_brevity_penalty_applied():
    # hypothesis shorter than reference: bp = exp(1 - r/c)
    pairs = [(("a", "b", "c", "d"), [("a", "b", "c", "d", "e", "f")])]
    stats = bleu_corpus_stats(pairs)
    assert stats.brevity_penalty() == pytest.approx(math.exp(1 - 6 / 4))


def test_closest_reference_length_tie_prefers_shorter():
    refs = [("a",) * 3, ("a",) * 5]
    assert closest_reference_length(4, refs) == 3
    assert closest_reference_length(5, refs) == 5


def test_multi_reference_clipping():
    # "a" appears twice in one reference, so two hypothesis copies count
    pairs = [(("a", "a", "b", "c"), [("a", "b", "c"), ("a", "a", "c", "d")])]
    stats = bleu_corpus_stats(pairs)
    assert stats.matched[0] == 4  # a, a, b, c all covered by max-ref counts


def test_corpus_aggregation_not_sentence_mean():
    pairs = [
        (("a", "b", "c", "d"), [("a", "b", "c", "d")]),
        (("x", "y", "z", "w"), [("q", "r", "s", "t")]),
    ]
    # aggregate 4-gram matches are 1 of 2, not the mean of 100 and 0
    stats = bleu_corpus_stats(pairs)
    assert stats.matched[3] == 1 and stats.total[3] == 2
    assert bleu_corpus(pairs) == pytest.approx(
        100 * math.exp(sum(math.log(m / t) for m, t in zip(stats.matched, stats.total)) / 4)
    )


def test_against_independent_oracle_fuzz():
    rng = random.Random(19)
    vocabulary = list("abcdef")
    for _ in range(150):
        pairs = []
        for _ in range(rng.randint(1, 5)):
            pred = tuple(rng.choice(vocabulary) for _ in range(rng.randint(1, 10)))
            refs = [
                tuple(rng.choice(vocabulary) for _ in range(rng.randint(1, 10)))
                for _ in range(rng.randint(1, 3))
            ]
            pairs.append((pred, refs))
        assert bleu_corpus(pairs) == pytest.approx(bleu_oracle(pairs), abs=1e-9)


def test_self_bleu_identity_with_source_reference():
    records = [
        (("a", "b", "c", "d"), ("a", "b", "x", "d")),
        (("p", "q", "r", "s"), ("p", "q", "r", "s")),
    ]
    direct = bleu_corpus([(pred, [src]) for pred, src in records])
    assert self_bleu(records) == direct


def test_self_bleu_copy_is_100():
    records = [(("a", "b", "c", "d"), ("a", "b", "c", "d"))] * 4
    assert self_bleu(records) == 100.0


def test_self_bleu_disjoint_is_0():
    records = [(("x", "y", "z", "q"), ("a", "b", "c", "d"))] * 2
    assert self_bleu(records) == 0.0


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        bleu_corpus([])


def test_empty_reference_list_rejected():
    with pytest.raises(ValueError):
        bleu_corpus([(("a",), [])])
