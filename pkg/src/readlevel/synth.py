"""Synthetic passages with controllable reading ease.

Used by tests and demo scripts wherever a corpus with a known score
profile is needed offline.  Passages are nonsense English assembled from
a vocabulary that overlaps the rewriter's synonym table, so the offline
provider has headroom to steer them in both directions.
"""

from __future__ import annotations

import random

from .dataset import Corpus, CorpusEntry
from .textcore import EmptyText, analyze, count_syllables, reading_ease

_FUNCTION_WORDS = (
    "the a of to in on at it we they he she was were is are had have this "
    "that with for from by as not all some who when then"
).split()

_SHORT_CONTENT = (
    "use help show end big small fast walk run eat build check send hold win "
    "stop look wait save add drop push pull turn hide share join good bad old "
    "new hard cold hot warm clean rich strong wide deep game prize flag room "
    "snow field rug girls boys met hung glass bright pines hills cloth view "
    "gem day time work plan home town road tree lake food friend met real "
    "calm loud quick bold brave fair firm flat round sharp raw ripe fresh"
).split()

_LONG_CONTENT = (
    "utilize facilitate demonstrate terminate substantial diminutive "
    "expeditious lethargic interrogate communicate manufacture accumulate "
    "discover contemplate articulate perambulate necessitate endeavor "
    "perpetuate accommodate reposition appropriate administer denominate "
    "relocate inhabit experience materialize evacuate congregate premeditate "
    "operate proliferate abbreviate enunciate consume construct disintegrate "
    "rehabilitate investigate nominate advantageous detrimental antiquated "
    "contemporary formidable malleable luminescent impenetrable refrigerated "
    "incandescent temperate saturated dehydrated immaculate contaminated "
    "prosperous impoverished indomitable ineffectual statuesque expansive "
    "attenuated consolidated fathomless approximate inaccessible comprehensive "
    "unoccupied invulnerable indubitable transparent equanimous cacophonous "
    "imperceptible perspicacious philosophical benevolent malevolent "
    "exhilarated melancholy infuriated authenticated fabricated legitimate "
    "unabridged predominant instrumental paramount terminal subsequent "
    "infinitesimal innumerable additional magnificent satisfactory agreeable "
    "monumental microscopic anomalous unembellished audacious courageous "
    "introverted egotistical preoccupied emancipated economical extravagant "
    "equitable incapacitated population designation terminology conversation "
    "narrative publication manuscript memorandum enumeration regulation "
    "legislation entitlement capability momentum velocity magnitude "
    "configuration pigmentation reverberation commotion fragrance sensation "
    "visibility duration generation existence mortality origination "
    "serendipity aspiration trepidation jubilation discomfort relaxation "
    "hibernation expedition transportation competition recompense contribution "
    "valuation expenditure remuneration obligation assessment transaction "
    "negotiation arrangement hostilities reconciliation altercation assistance "
    "facilitation supervision examination verification indication distinction "
    "demarcation particularity environment compartment entranceway partition "
    "foundation superstructure methodology trajectory progression revolution"
).split()


def _pools() -> tuple[list[str], list[tuple[str, int]], float]:
    mono = [w for w in _FUNCTION_WORDS + _SHORT_CONTENT if count_syllables(w) == 1]
    poly = [(w, count_syllables(w)) for w in _LONG_CONTENT if count_syllables(w) >= 3]
    poly_mean = sum(c for _, c in poly) / len(poly)
    return mono, poly, poly_mean


_POOLS: tuple[list[str], list[tuple[str, int]], float] | None = None


def _get_pools():
    global _POOLS
    if _POOLS is None:
        _POOLS = _pools()
    return _POOLS


def synthetic_passage(
    target_fres: float,
    rng: random.Random,
    n_sentences: int | None = None,
) -> str:
    """One passage whose measured reading ease lands near ``target_fres``.

    Sentence length and the share of polysyllabic words are solved from
    the score formula; the result typically measures within a few points
    of the target.
    """
    mono, poly, poly_mean = _get_pools()
    fres = float(target_fres)
    words_per_sentence = max(4.0, min(24.0, 4.0 + (95.0 - fres) / 90.0 * 20.0))
    syllables_per_word = (206.835 - 1.015 * words_per_sentence - fres) / 84.6
    syllables_per_word = max(1.02, min(3.2, syllables_per_word))
    p_poly = max(0.0, min(0.97, (syllables_per_word - 1.0) / (poly_mean - 1.0)))

    sentences = []
    for _ in range(n_sentences if n_sentences is not None else rng.randint(8, 12)):
        n_words = max(3, round(rng.gauss(words_per_sentence, words_per_sentence * 0.2)))
        words = []
        for _ in range(n_words):
            if rng.random() < p_poly:
                words.append(rng.choice(poly)[0])
            elif rng.random() < 0.4:
                words.append(rng.choice(mono))
            else:
                words.append(rng.choice(mono[len(_FUNCTION_WORDS):] or mono))
        if len(words) >= 8:
            words[len(words) // 2] = words[len(words) // 2] + ", and"
        sentence = " ".join(words)
        sentences.append(sentence[0].upper() + sentence[1:] + ".")
    if len(sentences) >= 6 and rng.random() < 0.25:
        cut = len(sentences) // 2
        return " ".join(sentences[:cut]) + "\n\n" + " ".join(sentences[cut:])
    return " ".join(sentences)


def synthetic_corpus(
    n: int,
    seed: int = 0,
    low: float = 10.0,
    high: float = 95.0,
    require_in_range: tuple[float, float] | None = None,
) -> Corpus:
    """A corpus of ``n`` passages with targets evenly spanning [low, high].

    With ``require_in_range`` set, passages are regenerated (with targets
    pulled toward the middle) until each measured score falls inside the
    half-open interval; handy for laws that only hold on in-range sources.
    """
    rng = random.Random(seed)
    entries = []
    for i in range(n):
        target = low if n == 1 else low + (high - low) * i / (n - 1)
        text = synthetic_passage(target, rng)
        if require_in_range is not None:
            lo, hi = require_in_range
            for _ in range(20):
                try:
                    f = analyze(text).fres
                except EmptyText:
                    f = None
                if f is not None and lo <= f < hi:
                    break
                target = target * 0.9 + 52.5 * 0.1
                text = synthetic_passage(target, rng)
        entries.append(CorpusEntry(source_id=f"synth-{i:04d}", text=text))
    return Corpus.from_entries(entries, path=None)
