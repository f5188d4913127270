"""Dataset ingestion, split-size validation, and file emission.

JSONL is the canonical format; TSV is accepted because public paraphrase
corpora ship that way. All writes are atomic (temp file + rename) and
UTF-8; a BOM is tolerated on read and never written.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

SPLIT_NAMES = ("train", "validation", "test")

# Published split sizes, used for sanity-checking loaded corpora.
KNOWN_SPLIT_SIZES: dict[str, dict[str, int]] = {
    "qqp-50k": {"train": 46_000, "validation": 4_000, "test": 4_000},
    "qqp-140k": {"train": 134_206, "validation": 5_255, "test": 5_255},
    "msrpc": {"train": 2_203, "validation": 550, "test": 1_147},
    "parasci-acl": {"train": 28_883, "validation": 2_753, "test": 2_345},
}


class DataFormatError(ValueError):
    """Malformed input file; carries path and 1-based line number."""

    def __init__(self, path: str | Path, line: int | None, message: str) -> None:
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class ParaphrasePair:
    """One dataset row: an input text and its (possibly empty) target."""

    id: str
    source: str
    target: str = ""

    def __post_init__(self) -> None:
        if not self.source:
            raise ValueError(f"pair {self.id!r}: source must be non-empty")


@dataclass
class DatasetSplit:
    name: str
    pairs: list[ParaphrasePair]
    expected_size: int | None = None

    def __len__(self) -> int:
        return len(self.pairs)


def _open_text(path: str | Path):
    # utf-8-sig transparently strips a BOM if present.
    return open(path, "r", encoding="utf-8-sig")


def load_pairs(path: str | Path, fmt: str | None = None, name: str = "train") -> DatasetSplit:
    """Load paraphrase pairs from a JSONL or TSV file, preserving order.

    JSONL lines look like {"id": ..., "source": ..., "target": ...}; ids
    are optional and auto-assigned as "0", "1", ... when absent. TSV rows
    carry either source<TAB>target or id<TAB>source<TAB>target. Duplicate
    ids are rejected.
    """
    if fmt is None:
        fmt = "tsv" if str(path).endswith((".tsv", ".txt")) else "jsonl"
    if fmt not in ("jsonl", "tsv"):
        raise ValueError(f"unknown dataset format {fmt!r}")
    pairs: list[ParaphrasePair] = []
    seen: set[str] = set()
    with _open_text(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if fmt == "jsonl":
                pair = _parse_jsonl_line(path, lineno, line, default_id=str(len(pairs)))
            else:
                pair = _parse_tsv_line(path, lineno, line, default_id=str(len(pairs)))
            if pair.id in seen:
                raise DataFormatError(path, lineno, f"duplicate id {pair.id!r}")
            seen.add(pair.id)
            pairs.append(pair)
    return DatasetSplit(name=name, pairs=pairs)


def _parse_jsonl_line(path, lineno: int, line: str, default_id: str) -> ParaphrasePair:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as err:
        raise DataFormatError(path, lineno, f"invalid JSON: {err.msg}") from err
    if not isinstance(obj, dict) or "source" not in obj:
        raise DataFormatError(path, lineno, 'expected an object with a "source" field')
    try:
        return ParaphrasePair(
            id=str(obj.get("id", default_id)),
            source=str(obj["source"]),
            target=str(obj.get("target", "")),
        )
    except ValueError as err:
        raise DataFormatError(path, lineno, str(err)) from err


def _parse_tsv_line(path, lineno: int, line: str, default_id: str) -> ParaphrasePair:
    cols = line.split("\t")
    if len(cols) == 2:
        row_id, source, target = default_id, cols[0], cols[1]
    elif len(cols) == 3:
        row_id, source, target = cols
    else:
        raise DataFormatError(
            path, lineno, f"expected 2 or 3 tab-separated columns, got {len(cols)}"
        )
    try:
        return ParaphrasePair(id=row_id, source=source, target=target)
    except ValueError as err:
        raise DataFormatError(path, lineno, str(err)) from err


@dataclass
class SplitSizeReport:
    dataset: str
    known: bool
    entries: list[tuple[str, int | None, int, bool]] = field(default_factory=list)

    @property
    def all_match(self) -> bool:
        return all(ok for _, _, _, ok in self.entries)

    def render(self) -> str:
        lines = [f"dataset: {self.dataset}" + ("" if self.known else " (custom, informational)")]
        for split, expected, actual, ok in self.entries:
            expect_s = "-" if expected is None else str(expected)
            flag = "ok" if ok else "MISMATCH"
            lines.append(f"  {split}: expected {expect_s}, got {actual} [{flag}]")
        return "\n".join(lines) + "\n"


def validate_split_sizes(
    splits: Iterable[DatasetSplit], dataset_name: str
) -> SplitSizeReport:
    """Compare split sizes against the published table; report, never raise."""
    key = dataset_name.lower().replace(" ", "-").replace("_", "-")
    expected_table = KNOWN_SPLIT_SIZES.get(key)
    report = SplitSizeReport(dataset=dataset_name, known=expected_table is not None)
    for split in splits:
        expected = split.expected_size
        if expected is None and expected_table is not None:
            expected = expected_table.get(split.name)
        ok = expected is None or expected == len(split)
        report.entries.append((split.name, expected, len(split), ok))
    return report


def atomic_write_text(path: str | Path, content: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    buf = io.StringIO()
    for row in rows:
        buf.write(json.dumps(row, ensure_ascii=False) + "\n")
    atomic_write_text(path, buf.getvalue())


def write_pairs(path: str | Path, pairs: Sequence[ParaphrasePair]) -> None:
    write_jsonl(
        path, ({"id": p.id, "source": p.source, "target": p.target} for p in pairs)
    )


def write_generations(path: str | Path, rows: Sequence[dict]) -> None:
    """Generation records: {"id", "prompt_n", "output"} plus free extras."""
    for row in rows:
        missing = {"id", "prompt_n", "output"} - set(row)
        if missing:
            raise ValueError(f"generation record missing fields: {sorted(missing)}")
    write_jsonl(path, rows)


def load_generations(path: str | Path) -> list[dict]:
    rows = []
    with _open_text(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataFormatError(path, lineno, f"invalid JSON: {err.msg}") from err
            if not isinstance(obj, dict) or "id" not in obj or "output" not in obj:
                raise DataFormatError(path, lineno, 'expected {"id", "prompt_n", "output"}')
            rows.append(obj)
    return rows


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def write_outputs(records, path: str | Path, kind: str) -> None:
    """Uniform emission entry point, dispatching on the record kind.

    "labeled" takes labeled novelty pairs, "generations" takes generation
    records, "report_csv" takes a metric report.
    """
    if kind == "labeled":
        write_jsonl(path, (r.as_dict() if hasattr(r, "as_dict") else r for r in records))
    elif kind == "generations":
        write_generations(path, records)
    elif kind == "report_csv":
        from .metrics.report import report_csv

        atomic_write_text(path, report_csv(records))
    else:
        raise ValueError(f"unknown output kind {kind!r}")
