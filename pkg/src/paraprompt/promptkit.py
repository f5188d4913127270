"""Prompt layout assembly: manual, exemplar, retrieval-augmented, and
novelty-conditioned layouts as structured segment sequences.

A layout is an ordered list of segments. Content segments (example
inputs/outputs and the query) carry tokens. Prefix and infix segments
come in two flavors: soft segments reference ranges of symbolic slot
ids, the positions a tuning-capable backend would bind learned
embeddings to (training itself is out of scope here), while the manual
template realizes prefix and infix as literal strings. ``render_text``
gives every layout a discrete textual form so generic text-in/text-out
backends can be driven too.

Layout shapes, with P=prefix, I=infix:

    manual:    P(text) x I(text)                       "Input: x\\nParaphrase:"
    exemplar:  [P X_i I Y_i]* P x I                    shared P/I slot ranges
    augmented: GLOBAL [P X_i I Y_i]* P x I             one global prefix block
    conditioned: like augmented, but each example's P/I cite the slot
        range of that example's novelty class, and the query's P/I cite
        the requested class

Examples always appear in ascending similarity order, so the nearest
example sits adjacent to the query.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .novelty import NoveltyClass
from .textcore import TokenSeq, render

DECODE_MARGIN = 100

DEFAULT_GLOBAL_PREFIX_LEN = 248
DEFAULT_CLASS_PREFIX_LEN = 8
DEFAULT_INFIX_LEN = 8


class AssemblyError(ValueError):
    pass


class TemplateError(ValueError):
    pass


class SegmentKind(enum.Enum):
    GLOBAL_PREFIX = "global_prefix"
    CLASS_PREFIX = "class_prefix"
    INFIX = "infix"
    EXAMPLE_INPUT = "example_input"
    EXAMPLE_OUTPUT = "example_output"
    QUERY_INPUT = "query_input"


SOFT_KINDS = {SegmentKind.GLOBAL_PREFIX, SegmentKind.CLASS_PREFIX, SegmentKind.INFIX}
CONTENT_KINDS = {
    SegmentKind.EXAMPLE_INPUT,
    SegmentKind.EXAMPLE_OUTPUT,
    SegmentKind.QUERY_INPUT,
}


@dataclass(frozen=True)
class SlotRange:
    """Half-open range of symbolic slot ids."""

    start: int
    stop: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.stop < self.start:
            raise ValueError(f"bad slot range [{self.start}, {self.stop})")

    def __len__(self) -> int:
        return self.stop - self.start

    def ids(self) -> range:
        return range(self.start, self.stop)


@dataclass(frozen=True)
class PromptSegment:
    kind: SegmentKind
    novelty: NoveltyClass | None = None
    slots: SlotRange | None = None
    tokens: TokenSeq | None = None
    literal: str | None = None

    def __post_init__(self) -> None:
        payloads = sum(x is not None for x in (self.slots, self.tokens, self.literal))
        if payloads != 1:
            raise ValueError(f"{self.kind.value}: exactly one payload required")
        if self.kind in CONTENT_KINDS and self.tokens is None:
            raise ValueError(f"{self.kind.value}: content segments carry tokens")
        if self.kind is SegmentKind.GLOBAL_PREFIX and self.slots is None:
            raise ValueError("global prefix is always a soft segment")
        if self.tokens is not None and self.kind not in CONTENT_KINDS:
            raise ValueError(f"{self.kind.value}: prefix/infix segments carry slots or a literal")

    @property
    def is_soft(self) -> bool:
        return self.slots is not None


@dataclass(frozen=True)
class SlotSpec:
    """Slot-span lengths: m for the global prefix, s per prefix, t per infix.

    ``classes`` is empty for layouts that do not condition on novelty;
    conditioned layouts allocate one prefix/infix range per class listed.
    """

    global_prefix_len: int = DEFAULT_GLOBAL_PREFIX_LEN
    class_prefix_len: int = DEFAULT_CLASS_PREFIX_LEN
    infix_len: int = DEFAULT_INFIX_LEN
    classes: tuple[NoveltyClass, ...] = ()

    def __post_init__(self) -> None:
        if self.global_prefix_len < 0:
            raise ValueError("global prefix length must be >= 0")
        if self.class_prefix_len < 1 or self.infix_len < 1:
            raise ValueError("prefix and infix lengths must be >= 1")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate classes in slot spec")

    def with_all_classes(self) -> "SlotSpec":
        return SlotSpec(
            global_prefix_len=self.global_prefix_len,
            class_prefix_len=self.class_prefix_len,
            infix_len=self.infix_len,
            classes=tuple(NoveltyClass),
        )


@dataclass(frozen=True)
class PromptExample:
    """A retrieved example pair ready for prompt inclusion."""

    source: TokenSeq
    target: TokenSeq
    similarity: float
    novelty: NoveltyClass | None = None
    id: str | None = None


@dataclass(frozen=True)
class PromptLayout:
    segments: tuple[PromptSegment, ...]
    spec: SlotSpec
    examples: tuple[PromptExample, ...] = ()
    slot_universe: int = 0

    def soft_slot_occurrences(self) -> int:
        """Total slot positions in the prompt, counting repeats."""
        return sum(len(seg.slots) for seg in self.segments if seg.slots is not None)

    def distinct_slot_ids(self) -> set[int]:
        ids: set[int] = set()
        for seg in self.segments:
            if seg.slots is not None:
                ids.update(seg.slots.ids())
        return ids


LAYOUT_GRAMMAR_CHARS = {
    SegmentKind.GLOBAL_PREFIX: "G",
    SegmentKind.CLASS_PREFIX: "P",
    SegmentKind.EXAMPLE_INPUT: "E",
    SegmentKind.INFIX: "I",
    SegmentKind.EXAMPLE_OUTPUT: "O",
    SegmentKind.QUERY_INPUT: "Q",
}

_LAYOUT_GRAMMAR = re.compile(r"G?(?:PEIO)*P?QI")


def validate_structure(layout: PromptLayout) -> None:
    """Check the segment order against the layout grammar."""
    word = "".join(LAYOUT_GRAMMAR_CHARS[seg.kind] for seg in layout.segments)
    if not _LAYOUT_GRAMMAR.fullmatch(word):
        raise AssemblyError(f"segment order {word!r} violates the layout grammar")


def _check_ascending(examples: Sequence[PromptExample]) -> None:
    sims = [e.similarity for e in examples]
    if any(a > b for a, b in zip(sims, sims[1:])):
        raise AssemblyError(
            "examples must be ordered by ascending similarity "
            f"(the nearest example last), got {sims}"
        )


def _query_tokens(x: TokenSeq) -> TokenSeq:
    if len(x) == 0:
        raise AssemblyError("query input must be non-empty")
    return tuple(x)


def assemble_manual(x: TokenSeq, template: "TextTemplate | None" = None) -> PromptLayout:
    """The hand-written template: literal prefix, query, literal infix."""
    template = template or DEFAULT_TEMPLATE
    segments = (
        PromptSegment(SegmentKind.CLASS_PREFIX, literal=template.prefix),
        PromptSegment(SegmentKind.QUERY_INPUT, tokens=_query_tokens(x)),
        PromptSegment(SegmentKind.INFIX, literal=template.infix),
    )
    spec = SlotSpec(global_prefix_len=0)
    return PromptLayout(segments=segments, spec=spec, slot_universe=0)


def _soft_body(
    x: TokenSeq,
    examples: Sequence[PromptExample],
    prefix_range: SlotRange,
    infix_range: SlotRange,
) -> list[PromptSegment]:
    segments: list[PromptSegment] = []
    for example in examples:
        segments.append(PromptSegment(SegmentKind.CLASS_PREFIX, slots=prefix_range))
        segments.append(PromptSegment(SegmentKind.EXAMPLE_INPUT, tokens=tuple(example.source)))
        segments.append(PromptSegment(SegmentKind.INFIX, slots=infix_range))
        segments.append(PromptSegment(SegmentKind.EXAMPLE_OUTPUT, tokens=tuple(example.target)))
    segments.append(PromptSegment(SegmentKind.CLASS_PREFIX, slots=prefix_range))
    segments.append(PromptSegment(SegmentKind.QUERY_INPUT, tokens=_query_tokens(x)))
    segments.append(PromptSegment(SegmentKind.INFIX, slots=infix_range))
    return segments


def assemble_exemplar(
    x: TokenSeq,
    examples: Sequence[PromptExample],
    spec: SlotSpec | None = None,
) -> PromptLayout:
    """Example-augmented prompt with shared soft prefix/infix, no global block."""
    spec = spec or SlotSpec()
    _check_ascending(examples)
    s, t = spec.class_prefix_len, spec.infix_len
    prefix_range = SlotRange(0, s)
    infix_range = SlotRange(s, s + t)
    segments = _soft_body(x, examples, prefix_range, infix_range)
    return PromptLayout(
        segments=tuple(segments),
        spec=spec,
        examples=tuple(examples),
        slot_universe=s + t,
    )


def assemble_rapt(
    x: TokenSeq,
    examples: Sequence[PromptExample],
    spec: SlotSpec | None = None,
) -> PromptLayout:
    """Retrieval-augmented layout: a global prefix block, then the exemplar body."""
    spec = spec or SlotSpec()
    _check_ascending(examples)
    m, s, t = spec.global_prefix_len, spec.class_prefix_len, spec.infix_len
    prefix_range = SlotRange(m, m + s)
    infix_range = SlotRange(m + s, m + s + t)
    segments = [PromptSegment(SegmentKind.GLOBAL_PREFIX, slots=SlotRange(0, m))]
    segments += _soft_body(x, examples, prefix_range, infix_range)
    return PromptLayout(
        segments=tuple(segments),
        spec=spec,
        examples=tuple(examples),
        slot_universe=m + s + t,
    )


def assemble_ncrapt(
    x: TokenSeq,
    examples: Sequence[PromptExample],
    query_class: NoveltyClass,
    spec: SlotSpec | None = None,
) -> PromptLayout:
    """Novelty-conditioned layout: per-class prefix/infix slot ranges.

    Each example cites the slot ranges of its own novelty class; the
    query cites the ranges of the class the caller wants generated. The
    global prefix block is shared across classes.
    """
    spec = spec or SlotSpec()
    if not spec.classes:
        spec = spec.with_all_classes()
    _check_ascending(examples)
    m, s, t = spec.global_prefix_len, spec.class_prefix_len, spec.infix_len

    def class_ranges(cls: NoveltyClass | None) -> tuple[SlotRange, SlotRange]:
        if cls is None:
            raise AssemblyError("every example needs a novelty class in conditioned mode")
        if cls not in spec.classes:
            raise AssemblyError(f"class {cls.label!r} not in slot spec classes")
        ci = spec.classes.index(cls)
        base = m + ci * (s + t)
        return SlotRange(base, base + s), SlotRange(base + s, base + s + t)

    segments = [PromptSegment(SegmentKind.GLOBAL_PREFIX, slots=SlotRange(0, m))]
    for example in examples:
        prefix_range, infix_range = class_ranges(example.novelty)
        segments.append(
            PromptSegment(SegmentKind.CLASS_PREFIX, novelty=example.novelty, slots=prefix_range)
        )
        segments.append(PromptSegment(SegmentKind.EXAMPLE_INPUT, tokens=tuple(example.source)))
        segments.append(
            PromptSegment(SegmentKind.INFIX, novelty=example.novelty, slots=infix_range)
        )
        segments.append(PromptSegment(SegmentKind.EXAMPLE_OUTPUT, tokens=tuple(example.target)))
    query_prefix, query_infix = class_ranges(query_class)
    segments.append(PromptSegment(SegmentKind.CLASS_PREFIX, novelty=query_class, slots=query_prefix))
    segments.append(PromptSegment(SegmentKind.QUERY_INPUT, tokens=_query_tokens(x)))
    segments.append(PromptSegment(SegmentKind.INFIX, novelty=query_class, slots=query_infix))
    return PromptLayout(
        segments=tuple(segments),
        spec=spec,
        examples=tuple(examples),
        slot_universe=m + len(spec.classes) * (s + t),
    )


@dataclass(frozen=True)
class TextTemplate:
    """Literal realizations for prompt segments in discrete (text) mode.

    Learned slot spans have no canonical text, so soft segments render
    through these stand-in strings; this is flagged in run metadata by
    callers. The infix starting with a newline guarantees its final
    occurrence in a rendered prompt is the query infix, because content
    tokens never contain whitespace.
    """

    prefix: str = "Input:"
    infix: str = "\nParaphrase:"
    global_prefix: str = "Generate a paraphrase of each input."
    example_separator: str = "\n\n"
    class_tags: dict = field(
        default_factory=lambda: {
            NoveltyClass.LOW: " (low)",
            NoveltyClass.MEDIUM: " (medium)",
            NoveltyClass.HIGH: " (high)",
        }
    )

    def infix_realization(self, novelty: NoveltyClass | None) -> str:
        if novelty is None:
            return self.infix
        if novelty not in self.class_tags:
            raise TemplateError(f"template has no realization for class {novelty.label!r}")
        return self.infix + self.class_tags[novelty]


DEFAULT_TEMPLATE = TextTemplate()


def _realize(segment: PromptSegment, template: TextTemplate) -> str:
    if segment.literal is not None:
        return segment.literal
    if segment.kind is SegmentKind.GLOBAL_PREFIX:
        return template.global_prefix
    if segment.kind is SegmentKind.CLASS_PREFIX:
        return template.prefix
    if segment.kind is SegmentKind.INFIX:
        return template.infix_realization(segment.novelty)
    return render(segment.tokens or ())


def render_text(layout: PromptLayout, template: TextTemplate | None = None) -> str:
    """Deterministic discrete rendering of a layout.

    The rendered prompt ends at the query infix, which doubles as the
    parse-back marker for completions.
    """
    template = template or DEFAULT_TEMPLATE
    pieces: list[str] = []
    prev: SegmentKind | None = None
    for segment in layout.segments:
        if prev in (SegmentKind.GLOBAL_PREFIX, SegmentKind.EXAMPLE_OUTPUT):
            pieces.append(template.example_separator)
        elif prev is SegmentKind.CLASS_PREFIX or prev is SegmentKind.INFIX:
            pieces.append(" ")
        pieces.append(_realize(segment, template))
        prev = segment.kind
    return "".join(pieces)


@dataclass(frozen=True)
class LayoutLength:
    prompt_tokens: int
    decode_budget: int


class LayoutLengthError(RuntimeError):
    def __init__(self, segment_index: int, cause: Exception) -> None:
        super().__init__(f"token counter failed on segment {segment_index}: {cause}")
        self.segment_index = segment_index


def layout_length(
    layout: PromptLayout, token_counter: Callable[[str], int]
) -> LayoutLength:
    """Prompt size n = soft slots + backend token counts of text segments.

    The decode budget is always n + 100: generation may spend at most 100
    tokens beyond the prompt.
    """
    n = 0
    for i, segment in enumerate(layout.segments):
        if segment.slots is not None:
            n += len(segment.slots)
            continue
        text = segment.literal if segment.literal is not None else render(segment.tokens or ())
        try:
            n += int(token_counter(text))
        except Exception as err:
            raise LayoutLengthError(i, err) from err
    return LayoutLength(prompt_tokens=n, decode_budget=n + DECODE_MARGIN)


def fit_examples_to_budget(
    assemble: Callable[[Sequence[PromptExample]], PromptLayout],
    examples: Sequence[PromptExample],
    token_counter: Callable[[str], int],
    max_prompt_tokens: int | None,
) -> tuple[PromptLayout, int]:
    """Drop least-similar examples (front of the ascending list) until the
    prompt fits; returns the layout and how many were dropped."""
    kept = list(examples)
    while True:
        layout = assemble(kept)
        if max_prompt_tokens is None:
            return layout, 0
        if layout_length(layout, token_counter).prompt_tokens <= max_prompt_tokens or not kept:
            return layout, len(examples) - len(kept)
        kept.pop(0)


def _segment_to_json(segment: PromptSegment) -> dict:
    out: dict = {"kind": segment.kind.value}
    if segment.novelty is not None:
        out["class"] = segment.novelty.label
    if segment.slots is not None:
        out["slots"] = [segment.slots.start, segment.slots.stop]
    if segment.tokens is not None:
        out["tokens"] = list(segment.tokens)
    if segment.literal is not None:
        out["literal"] = segment.literal
    return out


def layout_to_json(layout: PromptLayout) -> dict:
    return {
        "spec": {
            "global_prefix_len": layout.spec.global_prefix_len,
            "class_prefix_len": layout.spec.class_prefix_len,
            "infix_len": layout.spec.infix_len,
            "classes": [c.label for c in layout.spec.classes],
        },
        "slot_universe": layout.slot_universe,
        "segments": [_segment_to_json(seg) for seg in layout.segments],
        "examples": [
            {
                "source": list(e.source),
                "target": list(e.target),
                "similarity": e.similarity,
                "class": e.novelty.label if e.novelty else None,
                "id": e.id,
            }
            for e in layout.examples
        ],
    }


def layout_from_json(obj: dict) -> PromptLayout:
    spec = SlotSpec(
        global_prefix_len=obj["spec"]["global_prefix_len"],
        class_prefix_len=obj["spec"]["class_prefix_len"],
        infix_len=obj["spec"]["infix_len"],
        classes=tuple(NoveltyClass.from_label(c) for c in obj["spec"]["classes"]),
    )
    segments = []
    for seg in obj["segments"]:
        segments.append(
            PromptSegment(
                kind=SegmentKind(seg["kind"]),
                novelty=NoveltyClass.from_label(seg["class"]) if "class" in seg else None,
                slots=SlotRange(*seg["slots"]) if "slots" in seg else None,
                tokens=tuple(seg["tokens"]) if "tokens" in seg else None,
                literal=seg.get("literal"),
            )
        )
    examples = tuple(
        PromptExample(
            source=tuple(e["source"]),
            target=tuple(e["target"]),
            similarity=e["similarity"],
            novelty=NoveltyClass.from_label(e["class"]) if e.get("class") else None,
            id=e.get("id"),
        )
        for e in obj.get("examples", ())
    )
    return PromptLayout(
        segments=tuple(segments),
        spec=spec,
        examples=examples,
        slot_universe=obj.get("slot_universe", 0),
    )


_TEMPLATE_ESCAPES = {"\\n": "\n", "\\t": "\t", "\\\\": "\\"}


def _unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        pair = value[i : i + 2]
        if pair in _TEMPLATE_ESCAPES:
            out.append(_TEMPLATE_ESCAPES[pair])
            i += 2
        else:
            out.append(value[i])
            i += 1
    return "".join(out)


def load_template(path: str | Path) -> TextTemplate:
    """Template file: key=value lines with \\n, \\t, \\\\ escapes.

    Keys: prefix, infix, global_prefix, example_separator, tag_low,
    tag_medium, tag_high. Missing keys keep defaults.
    """
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8-sig") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "=" not in line:
                raise TemplateError(f"template line without '=': {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = _unescape(value)
    defaults = TextTemplate()
    tags = dict(defaults.class_tags)
    for cls in NoveltyClass:
        key = f"tag_{cls.label}"
        if key in values:
            tags[cls] = values[key]
    return TextTemplate(
        prefix=values.get("prefix", defaults.prefix),
        infix=values.get("infix", defaults.infix),
        global_prefix=values.get("global_prefix", defaults.global_prefix),
        example_separator=values.get("example_separator", defaults.example_separator),
        class_tags=tags,
    )
