"""Translation Edit Rate with greedy block shifts.

TER counts the edits (insertions, deletions, substitutions, and block
shifts, one point each) needed to turn a hypothesis into a reference,
divided by the reference length. The true minimum is intractable, so the
usual greedy search is used: repeatedly apply the shift that most reduces
the plain edit distance, then add the remaining edit distance.

A block qualifies for shifting only if it exactly matches a contiguous
span of the reference; it is moved to that span's position. Ties between
equally good shifts go to the leftmost block start, then the longest
block, then the leftmost destination. Every applied shift strictly
reduces the edit distance, so greedy TER never exceeds the shift-free
Levenshtein rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..textcore import TokenSeq

# Cap on shifted-block length, as in common TER implementations. Shifts of
# longer blocks are rare and the cap keeps the search quadratic-ish.
MAX_SHIFT_BLOCK = 10


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Word-level edit distance (insert/delete/substitute, unit costs)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, tok_a in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, tok_b in enumerate(b, start=1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (tok_a != tok_b),
            )
        prev = cur
    return prev[-1]


def _matching_blocks(
    hyp: list[str], ref: Sequence[str], max_block: int
) -> list[tuple[int, int, int]]:
    """All (hyp_start, ref_start, length) with hyp[i:i+l] == ref[j:j+l].

    Only maximal runs are extended token by token; every prefix length of a
    run is a candidate block, since a shorter shift is sometimes the better
    one.
    """
    out = []
    for i in range(len(hyp)):
        for j in range(len(ref)):
            if i == j and hyp[i] == ref[j]:
                # Already aligned at this offset; moving it there is a no-op.
                continue
            length = 0
            while (
                i + length < len(hyp)
                and j + length < len(ref)
                and length < max_block
                and hyp[i + length] == ref[j + length]
            ):
                length += 1
                out.append((i, j, length))
    return out


def _apply_shift(hyp: list[str], start: int, length: int, dest: int) -> list[str]:
    block = hyp[start : start + length]
    rest = hyp[:start] + hyp[start + length :]
    dest = min(dest, len(rest))
    return rest[:dest] + block + rest[dest:]


@dataclass(frozen=True)
class TerResult:
    edits: int
    shifts: int
    reference_length: int

    @property
    def rate(self) -> float:
        return self.edits / self.reference_length


def ter_detail(
    hypothesis: TokenSeq,
    reference: TokenSeq,
    max_block: int = MAX_SHIFT_BLOCK,
) -> TerResult:
    """Greedy-shift TER with the edit breakdown exposed."""
    if len(reference) == 0:
        raise ValueError("TER is undefined against an empty reference")
    cur = list(hypothesis)
    ref = list(reference)
    dist = levenshtein(cur, ref)
    shifts = 0
    while dist > 0:
        # (reduction, -start, length, -dest): max picks the largest
        # reduction, then leftmost start, longest block, leftmost dest.
        best_key = None
        best_seq = None
        best_dist = None
        for start, dest, length in _matching_blocks(cur, ref, max_block):
            cand = _apply_shift(cur, start, length, dest)
            cand_dist = levenshtein(cand, ref)
            if cand_dist >= dist:
                continue
            key = (dist - cand_dist, -start, length, -dest)
            if best_key is None or key > best_key:
                best_key = key
                best_seq = cand
                best_dist = cand_dist
        if best_seq is None:
            break
        cur = best_seq
        dist = best_dist
        shifts += 1
    return TerResult(edits=shifts + dist, shifts=shifts, reference_length=len(ref))


def ter(hypothesis: TokenSeq, reference: TokenSeq) -> float:
    """Greedy-shift TER as a ratio >= 0 (0 means identical)."""
    return ter_detail(hypothesis, reference).rate


@dataclass(frozen=True)
class SelfTerSummary:
    percent: float
    scored: int
    skipped: int


def self_ter(pairs: Sequence[tuple[TokenSeq, TokenSeq]]) -> SelfTerSummary:
    """Mean TER(prediction, source) x 100 over (prediction, source) pairs.

    Pairs with an empty source cannot be scored; they are skipped and
    counted so callers can surface the tally.
    """
    if not pairs:
        raise ValueError("self-TER needs a non-empty corpus")
    total = 0.0
    scored = 0
    skipped = 0
    for prediction, source in pairs:
        if len(source) == 0:
            skipped += 1
            continue
        total += ter(prediction, source)
        scored += 1
    if scored == 0:
        raise ValueError("self-TER: every record had an empty source")
    return SelfTerSummary(percent=100.0 * total / scored, scored=scored, skipped=skipped)
