import random

import pytest

from paraprompt.metrics import levenshtein, self_ter, ter, ter_detail

from oracles import exhaustive_min_ter, lev_recursive

ALPHABET = ["a", "b", "c", "d", "e"]


def rand_seq(rng, low, high):
    return tuple(rng.choice(ALPHABET) for _ in range(rng.randint(low, high)))


def test_identical_sequences():
    assert ter(("x", "y"), ("x", "y")) == 0.0


def test_single_insertion():
    # one insertion over a 4-token reference; no shift helps
    assert ter(("a", "b", "d"), ("a", "b", "c", "d")) == 0.25


def test_block_shift_beats_plain_edits():
    hyp = ("c", "d", "a", "b")
    ref = ("a", "b", "c", "d")
    assert ter(hyp, ref) == 0.25
    assert levenshtein(hyp, ref) / len(ref) == 1.0


def test_shift_details_exposed():
    detail = ter_detail(("c", "d", "a", "b"), ("a", "b", "c", "d"))
    assert detail.shifts == 1
    assert detail.edits == 1


def test_empty_hypothesis_is_all_deletions():
    assert ter((), ("a", "b")) == 1.0


def test_empty_reference_rejected():
    with pytest.raises(ValueError):
        ter(("a",), ())


def test_levenshtein_against_recursive_oracle():
    rng = random.Random(3)
    for _ in range(300):
        a = rand_seq(rng, 0, 7)
        b = rand_seq(rng, 0, 7)
        assert levenshtein(a, b) == lev_recursive(a, b)


def test_greedy_bounded_by_levenshtein_and_length_gap():
    rng = random.Random(11)
    for _ in range(400):
        ref = rand_seq(rng, 1, 8)
        hyp = rand_seq(rng, 0, 8)
        rate = ter(hyp, ref)
        assert rate <= levenshtein(hyp, ref) / len(ref) + 1e-12
        assert rate >= abs(len(hyp) - len(ref)) / len(ref) - 1e-12


def test_greedy_never_below_exhaustive_minimum():
    rng = random.Random(5)
    equal = 0
    cases = 200
    for _ in range(cases):
        ref = rand_seq(rng, 1, 6)
        hyp = rand_seq(rng, 0, 6)
        greedy = ter(hyp, ref)
        minimum = exhaustive_min_ter(hyp, ref)
        assert greedy >= minimum - 1e-12
        equal += abs(greedy - minimum) < 1e-12
    assert equal / cases >= 0.95


def test_self_ter_copy_is_zero():
    summary = self_ter([(("a", "b"), ("a", "b")), (("c",), ("c",))])
    assert summary.percent == 0.0
    assert summary.skipped == 0


def test_self_ter_single_record():
    summary = self_ter([(("x",), ("a", "b"))])
    assert summary.percent == 100.0


def test_self_ter_is_mean_of_rates():
    # rates 0.2 and 0.4 average to 30 percent
    records = [
        (("a", "b", "c", "d", "x"), ("a", "b", "c", "d", "e")),
        (("a", "b", "c", "x", "y"), ("a", "b", "c", "d", "e")),
    ]
    assert ter(*records[0]) == 0.2
    assert ter(*records[1]) == 0.4
    assert self_ter(records).percent == pytest.approx(30.0)


def test_self_ter_skips_empty_sources():
    summary = self_ter([(("a",), ()), (("a",), ("a",))])
    assert summary.percent == 0.0
    assert summary.skipped == 1
    assert summary.scored == 1


def test_self_ter_empty_corpus_rejected():
    with pytest.raises(ValueError):
        self_ter([])
