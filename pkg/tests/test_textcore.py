import pytest
from hypothesis import given, strategies as st

from paraprompt.textcore import (
    DEFAULT_NORMALIZATION,
    NormalizationConfig,
    ngram_windows,
    ngrams,
    normalize,
    normalize_text,
    render,
)


def test_normalize_all_rules():
    assert normalize("How do I Learn?") == ("how", "do", "i", "learn", "?")


def test_normalize_empty():
    assert normalize("") == ()


def test_collapse_whitespace():
    assert normalize("a  b") == ("a", "b")


def test_normalize_unicode_composition():
    # e + combining acute composes to a single scalar under NFC
    decomposed = "café"
    assert normalize(decomposed) == ("café",)


def test_punctuation_split_off():
    cfg = NormalizationConfig(punctuation_split=False)
    assert normalize("learn?", cfg) == ("learn?",)


def test_tokens_have_no_whitespace():
    for tok in normalize("a\tb\nc  d, e."):
        assert not any(ch.isspace() for ch in tok)
        assert tok


text_strategy = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=60
)


@given(text_strategy)
def test_normalize_idempotent(text):
    once = normalize(text)
    again = normalize(render(once))
    assert once == again


@given(text_strategy)
def test_normalize_text_idempotent(text):
    once = normalize_text(text)
    assert normalize_text(once) == once


def test_ngrams_unigram_counts():
    profile = ngrams(("a", "b", "a"), 1)
    assert profile.counts == {("a",): 2, ("b",): 1}


def test_ngrams_window_longer_than_sequence():
    assert ngrams(("a", "b"), 4).counts == {}


def test_ngrams_repeated_bigram():
    assert ngrams(("a", "a", "a"), 2).counts == {("a", "a"): 2}


@pytest.mark.parametrize("n", [0, 5, -1])
def test_ngrams_order_out_of_range(n):
    with pytest.raises(ValueError):
        ngrams(("a",), n)


@given(st.lists(st.sampled_from("abc"), max_size=12), st.integers(1, 4))
def test_window_count_identity(tokens, n):
    seq = tuple(tokens)
    profile = ngrams(seq, n)
    assert profile.total() == max(0, len(seq) - n + 1)
    assert profile.total() == len(ngram_windows(seq, n))


def test_default_config_records_all_rules():
    assert DEFAULT_NORMALIZATION.as_dict() == {
        "lowercase": True,
        "unicode_normalize": True,
        "punctuation_split": True,
        "collapse_whitespace": True,
    }
