"""Novelty classification of paraphrase pairs by Translation Edit Rate.

A pair's novelty is how far the target strays from the source, measured
as TER with the target as hypothesis and the source as reference (the
edits the paraphrase applies to the input; this direction is recorded in
output metadata since the reverse is equally defensible). Three ordered
classes partition the TER axis, with inclusive boundaries at both
thresholds: TER <= 0.2 is low, TER >= 0.4 is high, everything between is
medium.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .dataio import ParaphrasePair
from .metrics.ter import ter
from .textcore import DEFAULT_NORMALIZATION, NormalizationConfig, normalize

TER_DIRECTION = "hypothesis=target, reference=source"


class NoveltyClass(enum.IntEnum):
    """Totally ordered: LOW < MEDIUM < HIGH."""

    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "NoveltyClass":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown novelty class {label!r}") from None


@dataclass(frozen=True)
class NoveltyThresholds:
    low_max: float = 0.2
    high_min: float = 0.4

    def __post_init__(self) -> None:
        if not 0.0 < self.low_max < self.high_min:
            raise ValueError(
                f"need 0 < low_max < high_min, got {self.low_max}, {self.high_min}"
            )


DEFAULT_THRESHOLDS = NoveltyThresholds()


def classify(ter_value: float, thresholds: NoveltyThresholds = DEFAULT_THRESHOLDS) -> NoveltyClass:
    """Map a TER value to its novelty class (both boundaries inclusive)."""
    if ter_value < 0.0:
        raise ValueError(f"TER cannot be negative, got {ter_value}")
    if ter_value >= thresholds.high_min:
        return NoveltyClass.HIGH
    if ter_value <= thresholds.low_max:
        return NoveltyClass.LOW
    return NoveltyClass.MEDIUM


@dataclass(frozen=True)
class LabeledPair:
    pair: ParaphrasePair
    ter_value: float
    novelty: NoveltyClass

    def as_dict(self) -> dict:
        return {
            "id": self.pair.id,
            "source": self.pair.source,
            "target": self.pair.target,
            "ter": self.ter_value,
            "class": self.novelty.label,
        }


@dataclass
class LabelingResult:
    labeled: list[LabeledPair]
    rejected: list[tuple[ParaphrasePair, str]]
    thresholds: NoveltyThresholds
    normalization: NormalizationConfig
    histogram: Counter = field(default_factory=Counter)

    def metadata(self) -> dict:
        return {
            "ter_direction": TER_DIRECTION,
            "thresholds": {"low_max": self.thresholds.low_max, "high_min": self.thresholds.high_min},
            "normalization": self.normalization.as_dict(),
            "histogram": {c.label: self.histogram.get(c, 0) for c in NoveltyClass},
            "rejected": len(self.rejected),
        }


def label_dataset(
    pairs: Sequence[ParaphrasePair],
    cfg: NormalizationConfig = DEFAULT_NORMALIZATION,
    thresholds: NoveltyThresholds = DEFAULT_THRESHOLDS,
) -> LabelingResult:
    """Label every pair with TER(target, source) and its novelty class.

    Pairs whose source normalizes to nothing cannot be rated; they land
    in ``rejected`` with a reason and the run continues.
    """
    result = LabelingResult(
        labeled=[], rejected=[], thresholds=thresholds, normalization=cfg
    )
    for pair in pairs:
        source_tokens = normalize(pair.source, cfg)
        if not source_tokens:
            result.rejected.append((pair, "source is empty after normalization"))
            continue
        target_tokens = normalize(pair.target, cfg)
        ter_value = ter(target_tokens, source_tokens)
        novelty = classify(ter_value, thresholds)
        result.labeled.append(LabeledPair(pair=pair, ter_value=ter_value, novelty=novelty))
        result.histogram[novelty] += 1
    return result


def labeled_pair_from_dict(obj: dict) -> LabeledPair:
    return LabeledPair(
        pair=ParaphrasePair(id=str(obj["id"]), source=obj["source"], target=obj["target"]),
        ter_value=float(obj["ter"]),
        novelty=NoveltyClass.from_label(obj["class"]),
    )
