"""Deterministic text analysis: word tokens, sentence spans, syllables, reading ease.

All counting here is rule-based and self-contained so that scores are
reproducible across machines and runs.  The conventions are:

* Word tokens are maximal runs of letters/digits, optionally joined by
  internal apostrophes or hyphens ("snow-white" and "don't" are single
  tokens).  Punctuation and whitespace never form tokens.
* Sentences end at runs of ``. ! ?`` followed by whitespace and an
  uppercase start (closing/opening quotes allowed in between) or at end
  of text.  A fixed abbreviation list plus dotted abbreviations
  ("e.g.", "U.S.") and single-letter initials suppress false splits.
  Text with no terminal punctuation is one sentence.
* Syllables are counted as vowel groups (a e i o u y) per hyphen-separated
  part, with a silent final "e" subtracted unless the word ends in
  consonant + "le" ("table" keeps both syllables), minimum one per part.
  Apostrophes are ignored ("don't" counts as "dont").  Each digit in a
  numeric token contributes one syllable ("1948" counts 4).  An optional
  pronunciation lexicon overrides the rules per word.

The reading-ease score is 206.835 - 1.015*(words/sentences)
- 84.6*(syllables/words); higher means easier, nominally 0..100 but
unbounded on real text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path


class EmptyText(ValueError):
    """The passage contains no word tokens and cannot be scored."""


_TOKEN_RE = re.compile(r"[^\W_]+(?:['’-][^\W_]+)*")

# Terminal punctuation run, swallowing closing quotes/brackets.
_BOUNDARY_RE = re.compile(r"[.!?]+[\"'”’)\]]*")

# Word (possibly dotted, like "e.g" or "U.S") directly before a period.
_WORD_BEFORE_RE = re.compile(r"([A-Za-z]+(?:\.[A-Za-z]+)*)$")

_OPENING_QUOTES = "\"'“‘(["

# Versioned list of period-bearing abbreviations that never end a sentence.
# Dotted forms ("e.g.", "i.e.", "U.S.") are handled structurally and need
# no entry here.
_ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "etc", "vs",
    "cf", "al", "fig", "vol", "mt", "inc", "ltd", "co",
    "capt", "col", "gen", "lt", "sgt", "rev", "hon", "sen", "rep",
    "approx", "dept", "est",
})

_VOWELS = frozenset("aeiouy")

TARGET_LEVELS = (5, 20, 40, 55, 65, 75, 85, 95)


@dataclass(frozen=True)
class ReadabilityClass:
    """One of the eight reading-ease intervals, labeled by its midpoint."""

    label: int
    lower: float
    upper: float
    grade: str
    description: str

    def contains(self, value: float) -> bool:
        """Half-open membership; the top class additionally includes 100."""
        if self.lower <= value < self.upper:
            return True
        return self.label == 95 and value == 100.0


CLASSES: tuple[ReadabilityClass, ...] = (
    ReadabilityClass(5, 0.0, 10.0, "Professional",
                     "Extremely difficult to read. Best understood by university graduates."),
    ReadabilityClass(20, 10.0, 30.0, "College graduate",
                     "Very difficult to read. Best understood by university graduates."),
    ReadabilityClass(40, 30.0, 50.0, "College", "Difficult to read."),
    ReadabilityClass(55, 50.0, 60.0, "10-12th grade", "Fairly difficult to read."),
    ReadabilityClass(65, 60.0, 70.0, "8-9th grade",
                     "Plain English. Easily understood by 13- to 15-year-old students."),
    ReadabilityClass(75, 70.0, 80.0, "7th grade", "Fairly easy to read."),
    ReadabilityClass(85, 80.0, 90.0, "6th grade",
                     "Easy to read. Conversational English for consumers."),
    ReadabilityClass(95, 90.0, 100.0, "5th grade",
                     "Very easy to read. Easily understood by an average 11-year-old student."),
)

CLASS_BY_LABEL: dict[int, ReadabilityClass] = {c.label: c for c in CLASSES}


@dataclass(frozen=True)
class TextAnalysis:
    """Token/sentence/syllable decomposition of one passage plus its score."""

    text: str
    tokens: tuple[str, ...]
    sentence_spans: tuple[tuple[int, int], ...]
    syllable_counts: tuple[int, ...]
    n_words: int
    n_sentences: int
    n_syllables: int
    fres: float


def tokenize(text: str) -> list[str]:
    """Split text into word tokens; punctuation and whitespace are dropped."""
    return _TOKEN_RE.findall(text)


def _sentence_boundaries(text: str) -> list[int]:
    """Character offsets where one sentence ends and another may begin."""
    bounds = []
    for m in _BOUNDARY_RE.finditer(text):
        rest = text[m.end():]
        stripped = rest.lstrip()
        if not stripped:
            continue  # end of text closes the final sentence implicitly
        if len(stripped) == len(rest):
            continue  # no whitespace after punctuation: "3.5", "e.g.x"
        lead = stripped.lstrip(_OPENING_QUOTES)
        if not lead or not lead[0].isupper():
            continue
        if "." in m.group():
            before = _WORD_BEFORE_RE.search(text, 0, m.start())
            if before is not None:
                word = before.group(1)
                if "." in word:
                    continue  # dotted abbreviation: e.g., i.e., U.S.
                if word.lower() in _ABBREVIATIONS:
                    continue
                if len(word) == 1 and word.isupper() and word != "I":
                    continue  # initial, as in "J. Smith"
        bounds.append(m.end())
    return bounds


def segment_sentences(text: str, tokens: list[str] | None = None) -> list[tuple[int, int]]:
    """Group token indices into sentences; returns half-open index spans.

    ``tokens`` must come from :func:`tokenize` on the same text when given;
    it is only used as a consistency check.
    """
    offsets = [m.start() for m in _TOKEN_RE.finditer(text)]
    if tokens is not None and len(tokens) != len(offsets):
        raise ValueError("tokens do not match this text")
    if not offsets:
        return []
    bounds = _sentence_boundaries(text)
    spans: list[tuple[int, int]] = []
    start = 0
    bi = 0
    for idx, off in enumerate(offsets):
        while bi < len(bounds) and off >= bounds[bi]:
            if idx > start:
                spans.append((start, idx))
                start = idx
            bi += 1
    spans.append((start, len(offsets)))
    return spans


def sentence_strings(text: str) -> list[str]:
    """The sentence substrings of ``text``, in order, stripped of margins."""
    bounds = _sentence_boundaries(text)
    pieces = []
    start = 0
    for b in bounds + [len(text)]:
        piece = text[start:b].strip()
        if piece:
            pieces.append(piece)
        start = b
    return pieces


def _count_letter_run(run: str) -> int:
    groups = 0
    prev_vowel = False
    for ch in run:
        is_vowel = ch in _VOWELS
        if is_vowel and not prev_vowel:
            groups += 1
        prev_vowel = is_vowel
    if run.endswith("e") and groups > 1:
        # Final "e" is silent unless carried by a consonant + "le" ending.
        if not (run.endswith("le") and len(run) > 2 and run[-3] not in _VOWELS):
            groups -= 1
    return groups


def count_syllables(token: str, lexicon: dict[str, int] | None = None) -> int:
    """Rule-based syllable count for one word token, minimum 1."""
    word = token.lower().replace("'", "").replace("’", "")
    if lexicon:
        override = lexicon.get(word)
        if override is not None:
            return override
    total = 0
    for part in word.split("-"):
        if not part:
            continue
        part_count = 0
        for run in re.findall(r"[a-z]+|[0-9]", part):
            if run.isdigit():
                part_count += 1  # digits are read out individually
            else:
                part_count += _count_letter_run(run)
        total += max(part_count, 1)
    return max(total, 1)


def reading_ease(n_words: int, n_sentences: int, n_syllables: int) -> float:
    """The score from the stored counts; recomputable bit-for-bit."""
    return 206.835 - 1.015 * (n_words / n_sentences) - 84.6 * (n_syllables / n_words)


def analyze(text: str, lexicon: dict[str, int] | None = None) -> TextAnalysis:
    """Full deterministic analysis of one passage.

    Raises :class:`EmptyText` when no word tokens are found; callers must
    not score such input.
    """
    tokens = tokenize(text)
    if not tokens:
        raise EmptyText("no word tokens found")
    spans = segment_sentences(text, tokens)
    counts = tuple(count_syllables(t, lexicon) for t in tokens)
    n_words = len(tokens)
    n_sentences = len(spans)
    n_syllables = sum(counts)
    return TextAnalysis(
        text=text,
        tokens=tuple(tokens),
        sentence_spans=tuple(spans),
        syllable_counts=counts,
        n_words=n_words,
        n_sentences=n_sentences,
        n_syllables=n_syllables,
        fres=reading_ease(n_words, n_sentences, n_syllables),
    )


def classify(value: float) -> ReadabilityClass | None:
    """Map a score to its class, or None when outside [0, 100].

    The eight intervals partition [0, 100]: each is closed below and open
    above except the top one, which includes 100 exactly.  Out-of-range
    values are a legitimate outcome (the score is unbounded) and count as
    incorrect wherever classification accuracy is computed.
    """
    if value < 0.0 or value > 100.0:
        return None
    if value == 100.0:
        return CLASSES[-1]
    for cls in CLASSES:
        if cls.lower <= value < cls.upper:
            return cls
    return None


def load_syllable_lexicon(path: str | Path) -> dict[str, int]:
    """Parse a pronunciation lexicon: one ``word<TAB>count`` per line, UTF-8."""
    lexicon: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                word, count = line.split("\t")
                lexicon[word.lower()] = int(count)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: expected 'word<TAB>count'") from exc
    return lexicon
