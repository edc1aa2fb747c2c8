"""Corpus ingestion, corpus statistics and reading-ease histograms.

Two input shapes are supported: an RFC-4180-style delimited file (UTF-8,
quoted multi-line fields, configurable delimiter and column names) or a
directory of ``.txt`` files whose stems become source ids.  A loaded
corpus carries a content hash so downstream runs can refuse silently
changed data.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import textcore


class CorpusError(ValueError):
    pass


class MissingColumn(CorpusError):
    """Declared column absent from the file header."""


class MalformedRow(CorpusError):
    """Row with the wrong field count; message carries the row number."""


class DuplicateSourceId(CorpusError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    source_id: str
    text: str
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Corpus:
    """Loaded entries plus provenance: path, content hash, skip count."""

    entries: tuple[CorpusEntry, ...]
    path: str | None
    content_sha256: str
    skipped_empty: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    @staticmethod
    def from_entries(entries, path: str | None = None) -> "Corpus":
        entries = tuple(entries)
        payload = json.dumps(
            [[e.source_id, e.text] for e in entries], ensure_ascii=False
        ).encode("utf-8")
        return Corpus(
            entries=entries,
            path=path,
            content_sha256=hashlib.sha256(payload).hexdigest(),
        )


def _check_unique(entries: list[CorpusEntry]) -> None:
    seen: set[str] = set()
    for e in entries:
        if e.source_id in seen:
            raise DuplicateSourceId(f"duplicate source_id {e.source_id!r}")
        seen.add(e.source_id)


def load_corpus(
    path: str | Path,
    text_column: str = "text",
    id_column: str | None = None,
    delimiter: str = ",",
) -> Corpus:
    """Parse a delimited corpus file.

    Rows whose text is empty after trimming are skipped and counted.  When
    ``id_column`` is not given, the 0-based data-row index becomes the
    source id.  Remaining columns ride along in ``entry.extra``.
    """
    path = Path(path)
    raw = path.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    entries: list[CorpusEntry] = []
    skipped = 0
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(f"{path}: file has no header row") from None
        if text_column not in header:
            raise MissingColumn(
                f"{path}: no column {text_column!r}; available: {header}"
            )
        if id_column is not None and id_column not in header:
            raise MissingColumn(
                f"{path}: no column {id_column!r}; available: {header}"
            )
        text_idx = header.index(text_column)
        id_idx = header.index(id_column) if id_column is not None else None
        for row_number, row in enumerate(reader):
            if len(row) != len(header):
                raise MalformedRow(
                    f"{path}: row {row_number} has {len(row)} fields, expected {len(header)}"
                )
            text = row[text_idx].strip()
            if not text:
                skipped += 1
                continue
            source_id = row[id_idx] if id_idx is not None else str(row_number)
            extra = {
                name: row[i]
                for i, name in enumerate(header)
                if i not in (text_idx, id_idx)
            }
            entries.append(CorpusEntry(source_id=source_id, text=text, extra=extra))
    _check_unique(entries)
    return Corpus(
        entries=tuple(entries),
        path=str(path),
        content_sha256=digest,
        skipped_empty=skipped,
    )


def load_corpus_dir(path: str | Path) -> Corpus:
    """Load a directory of ``.txt`` files; each file stem is a source id."""
    path = Path(path)
    hasher = hashlib.sha256()
    entries: list[CorpusEntry] = []
    skipped = 0
    for file in sorted(path.glob("*.txt")):
        raw = file.read_bytes()
        hasher.update(file.name.encode("utf-8"))
        hasher.update(raw)
        text = raw.decode("utf-8").strip()
        if not text:
            skipped += 1
            continue
        entries.append(CorpusEntry(source_id=file.stem, text=text))
    _check_unique(entries)
    return Corpus(
        entries=tuple(entries),
        path=str(path),
        content_sha256=hasher.hexdigest(),
        skipped_empty=skipped,
    )


def save_corpus(
    entries,
    path: str | Path,
    text_column: str = "text",
    id_column: str = "id",
    delimiter: str = ",",
) -> None:
    """Write entries back out in the delimited format :func:`load_corpus` reads."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow([id_column, text_column])
        for e in entries:
            writer.writerow([e.source_id, e.text])


_PARAGRAPH_SPLIT_RE = re.compile(r"\n\s*\n")


def paragraph_count(text: str) -> int:
    """Blank-line-separated blocks, minimum 1."""
    blocks = [b for b in _PARAGRAPH_SPLIT_RE.split(text) if b.strip()]
    return max(len(blocks), 1)


@dataclass(frozen=True)
class CorpusStats:
    n_examples: int
    words_mean: float
    words_std: float
    sentences_mean: float
    sentences_std: float
    paragraphs_mean: float
    paragraphs_std: float


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n  # population std
    return mean, math.sqrt(var)


def corpus_stats(entries, lexicon: dict[str, int] | None = None) -> CorpusStats:
    """Per-entry word/sentence/paragraph counts summarized as mean and std."""
    entries = list(entries)
    if not entries:
        raise CorpusError("empty corpus has no statistics")
    words, sentences, paragraphs = [], [], []
    for e in entries:
        analysis = textcore.analyze(e.text, lexicon)
        words.append(float(analysis.n_words))
        sentences.append(float(analysis.n_sentences))
        paragraphs.append(float(paragraph_count(e.text)))
    wm, ws = _mean_std(words)
    sm, ss = _mean_std(sentences)
    pm, ps = _mean_std(paragraphs)
    return CorpusStats(len(entries), wm, ws, sm, ss, pm, ps)


@dataclass(frozen=True)
class Histogram:
    bin_width: float
    starts: tuple[float, ...]
    counts: tuple[int, ...]
    n: int


def fres_histogram(
    entries,
    bin_width: float = 5.0,
    origin: float | None = None,
    lexicon: dict[str, int] | None = None,
) -> Histogram:
    """Fixed-width histogram of per-entry reading-ease scores.

    Bins are anchored at ``origin`` (default: the largest multiple of the
    width not above the minimum score) and extended downward if values
    fall below it, so counts always sum to the number of scored entries.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    scores = [textcore.analyze(e.text, lexicon).fres for e in entries]
    if not scores:
        return Histogram(bin_width=bin_width, starts=(), counts=(), n=0)
    lo, hi = min(scores), max(scores)
    if origin is None:
        origin = math.floor(lo / bin_width) * bin_width
    first = math.floor((lo - origin) / bin_width)
    last = math.floor((hi - origin) / bin_width)
    counts = [0] * (last - first + 1)
    for s in scores:
        counts[math.floor((s - origin) / bin_width) - first] += 1
    starts = tuple(origin + (first + i) * bin_width for i in range(len(counts)))
    return Histogram(bin_width=bin_width, starts=starts, counts=tuple(counts), n=len(scores))
