"""Text normalization, tokenization, and n-gram extraction.

Every metric in this package operates on token sequences produced here, so
evaluation results are only comparable when the same ``NormalizationConfig``
was used; reports therefore record the config they were computed under.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass

TokenSeq = tuple[str, ...]

MAX_NGRAM_ORDER = 4


@dataclass(frozen=True)
class NormalizationConfig:
    """Switches for the four normalization rules, applied in field order."""

    lowercase: bool = True
    unicode_normalize: bool = True
    punctuation_split: bool = True
    collapse_whitespace: bool = True

    def as_dict(self) -> dict[str, bool]:
        return {
            "lowercase": self.lowercase,
            "unicode_normalize": self.unicode_normalize,
            "punctuation_split": self.punctuation_split,
            "collapse_whitespace": self.collapse_whitespace,
        }


DEFAULT_NORMALIZATION = NormalizationConfig()


def _split_punctuation(text: str) -> str:
    out: list[str] = []
    for ch in text:
        if unicodedata.category(ch).startswith("P"):
            out.append(" ")
            out.append(ch)
            out.append(" ")
        else:
            out.append(ch)
    return "".join(out)


def normalize_text(text: str, cfg: NormalizationConfig = DEFAULT_NORMALIZATION) -> str:
    """Apply the configured normalization rules, returning a plain string."""
    if cfg.unicode_normalize:
        text = unicodedata.normalize("NFC", text)
    if cfg.lowercase:
        text = text.lower()
    if cfg.punctuation_split:
        text = _split_punctuation(text)
    if cfg.collapse_whitespace:
        text = " ".join(text.split())
    return text


def normalize(text: str, cfg: NormalizationConfig = DEFAULT_NORMALIZATION) -> TokenSeq:
    """Normalize and tokenize ``text``.

    Total and idempotent: empty input yields the empty sequence, and
    re-normalizing the space-joined output is a no-op. Tokens never
    contain whitespace.
    """
    return tuple(normalize_text(text, cfg).split())


def render(seq: TokenSeq) -> str:
    """Inverse-ish of :func:`normalize`: join tokens with single spaces."""
    return " ".join(seq)


@dataclass(frozen=True)
class NGramProfile:
    """Multiset of the n-token windows of one sequence."""

    n: int
    counts: Counter

    def total(self) -> int:
        return sum(self.counts.values())


def ngram_windows(seq: TokenSeq, n: int) -> list[TokenSeq]:
    if not 1 <= n <= MAX_NGRAM_ORDER:
        raise ValueError(f"n-gram order must be in [1, {MAX_NGRAM_ORDER}], got {n}")
    return [tuple(seq[i : i + n]) for i in range(len(seq) - n + 1)]


def ngrams(seq: TokenSeq, n: int) -> NGramProfile:
    """Sliding-window n-gram counts; the count total is max(0, len-n+1)."""
    return NGramProfile(n=n, counts=Counter(ngram_windows(seq, n)))
