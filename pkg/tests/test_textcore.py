from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from readlevel.textcore import (
    CLASSES,
    TARGET_LEVELS,
    EmptyText,
    analyze,
    classify,
    count_syllables,
    load_syllable_lexicon,
    reading_ease,
    segment_sentences,
    sentence_strings,
    tokenize,
)

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / f"{name}.txt").read_text(encoding="utf-8").strip()


# --- tokenize ---------------------------------------------------------------

@pytest.mark.parametrize(
    "text,expected",
    [
        ("Go. Run.", ["Go", "Run"]),
        ("snow-white canvas", ["snow-white", "canvas"]),
        ("", []),
        ("don't stop", ["don't", "stop"]),
        ("well -- dashed", ["well", "dashed"]),
        ("'quoted' words", ["quoted", "words"]),
        ("late-19th-century", ["late-19th-century"]),
        ("cost $5.50 today", ["cost", "5", "50", "today"]),
    ],
)
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_tokenize_never_emits_punctuation():
    tokens = tokenize("Hello, world! (Really?) -- yes; \"sure.\"")
    assert tokens == ["Hello", "world", "Really", "yes", "sure"]


# --- sentence segmentation --------------------------------------------------

@pytest.mark.parametrize(
    "text,n_sentences",
    [
        ("Go. Run.", 2),
        ("Dr. Smith ran.", 1),
        ("no punctuation here", 1),
        ("Mr. and Mrs. Jones left. They came back.", 2),
        ("See e.g. the manual. Then continue.", 2),
        ("It cost 3.5 dollars today.", 1),
        ("J. Smith arrived. K. Jones left.", 2),
        ("He shouted \"Stop!\" Then silence.", 2),
        ("Wait... What happened?", 2),
        ("One! Two? Three.", 3),
    ],
)
def test_sentence_counts(text, n_sentences):
    spans = segment_sentences(text)
    assert len(spans) == n_sentences


def test_spans_partition_tokens():
    text = "The quick fox. It jumped! Was it high? Yes."
    tokens = tokenize(text)
    spans = segment_sentences(text, tokens)
    covered = [i for start, end in spans for i in range(start, end)]
    assert covered == list(range(len(tokens)))
    assert all(end > start for start, end in spans)


def test_segment_empty_text():
    assert segment_sentences("") == []


def test_sentence_strings_round_trip():
    text = "First part here. Second one follows! Third?"
    assert sentence_strings(text) == [
        "First part here.",
        "Second one follows!",
        "Third?",
    ]


# --- syllables ----------------------------------------------------------------

@pytest.mark.parametrize(
    "token,count",
    [
        ("cat", 1),
        ("readability", 5),
        ("make", 1),
        ("table", 2),
        ("whale", 1),
        ("people", 2),
        ("the", 1),
        ("1948", 4),
        ("x-ray", 2),
        ("don't", 1),
        ("o'clock", 2),
        ("snow-white", 2),
        ("rhythm", 1),
        ("beautiful", 3),
    ],
)
def test_count_syllables(token, count):
    assert count_syllables(token) == count


def test_syllable_minimum_is_one():
    assert count_syllables("tsk") == 1


def test_lexicon_overrides_rules(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("make\t2\nbusiness\t2\n", encoding="utf-8")
    lexicon = load_syllable_lexicon(path)
    assert count_syllables("make", lexicon) == 2
    assert count_syllables("Make", lexicon) == 2
    assert count_syllables("cat", lexicon) == 1


def test_lexicon_rejects_malformed_lines(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("make two\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_syllable_lexicon(path)


# --- analyze ------------------------------------------------------------------

def test_analyze_go_run_exact():
    a = analyze("Go. Run.")
    assert (a.n_words, a.n_sentences, a.n_syllables) == (2, 2, 2)
    assert a.fres == pytest.approx(121.22, abs=1e-9)


def test_analyze_rejects_empty():
    with pytest.raises(EmptyText):
        analyze("  ... !! ")


def test_analyze_counts_consistent():
    a = analyze("The quick brown fox jumps over the lazy dog. It was fast.")
    assert a.n_words == len(a.tokens)
    assert a.n_syllables == sum(a.syllable_counts)
    assert a.n_sentences == len(a.sentence_spans) == 2
    assert all(c >= 1 for c in a.syllable_counts)


def test_golden_source_passage():
    a = analyze(fixture_text("snowfield_source"))
    assert a.fres == pytest.approx(74.5, abs=2.0)


@pytest.mark.parametrize("name", ["t05", "t20", "t40", "t55", "t65", "t75", "t85", "t95"])
def test_golden_paraphrases(name):
    expected = json.loads((FIXTURES / "snowfield_expected.json").read_text())
    a = analyze(fixture_text(f"snowfield_{name}"))
    assert a.fres == pytest.approx(expected[name]["fres"], abs=3.5)


def test_recompute_matches_stored():
    a = analyze(fixture_text("snowfield_source"))
    assert abs(reading_ease(a.n_words, a.n_sentences, a.n_syllables) - a.fres) < 1e-12


def test_determinism_across_threads():
    text = fixture_text("snowfield_source")
    baseline = analyze(text).fres
    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(lambda _: analyze(text).fres, range(64)))
    assert all(r == baseline for r in results)


# --- classify -------------------------------------------------------------------

@pytest.mark.parametrize(
    "value,label",
    [
        (65.0, 65),
        (10.0, 20),
        (0.0, 5),
        (9.999, 5),
        (100.0, 95),
        (89.999, 85),
        (90.0, 95),
    ],
)
def test_classify_in_range(value, label):
    cls = classify(value)
    assert cls is not None and cls.label == label


@pytest.mark.parametrize("value", [121.22, -3.0, 100.001, -0.0001])
def test_classify_out_of_range(value):
    assert classify(value) is None


def test_labels_are_interval_midpoints():
    for cls in CLASSES:
        assert cls.label == (cls.lower + cls.upper) / 2
    assert tuple(c.label for c in CLASSES) == TARGET_LEVELS


@given(st.floats(min_value=0.0, max_value=100.0, allow_nan=False))
def test_partition_property(value):
    members = [c for c in CLASSES if c.contains(value)]
    assert len(members) == 1
    assert classify(value) is members[0]


@given(
    st.integers(min_value=1, max_value=500),
    st.integers(min_value=1, max_value=50),
    st.integers(min_value=1, max_value=1500),
)
def test_reading_ease_monotonicity(n_words, n_sentences, n_syllables):
    base = reading_ease(n_words, n_sentences, n_syllables)
    assert reading_ease(n_words, n_sentences + 1, n_syllables) > base
    assert reading_ease(n_words, n_sentences, n_syllables + 1) < base
