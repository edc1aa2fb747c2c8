"""Paraphrase providers: prompt catalog, HTTP chat client, offline rewriter.

Two provider kinds share one payload shape (built by :func:`build_prompt`):

* ``chat-http`` posts a chat-completions request (model, messages,
  temperature) to a configured endpoint, with exponential-backoff retries
  on transient failures, a shared token-bucket rate limit and a cap on
  in-flight requests.  The credential comes from an environment variable
  named in the config; it is never written to disk.
* ``mock`` is a deterministic offline rewriter that steers the measured
  reading ease of the document toward the requested level by splitting or
  merging sentences and swapping words against a built-in synonym table.
  It exists so end-to-end runs and tests need no network or model.

A small garbage detector decides when provider output is incoherent
enough that the caller should fall back to the input text.
"""

from __future__ import annotations

import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import requests

from .textcore import (
    EmptyText,
    analyze,
    count_syllables,
    reading_ease,
    sentence_strings,
    tokenize,
)

TARGET_LEVELS = (5, 20, 40, 55, 65, 75, 85, 95)


class ProviderError(RuntimeError):
    pass


class UnknownLevel(ProviderError):
    """Requested target level has no prompt in the catalog."""


class AuthError(ProviderError):
    """Missing or rejected credential; never retried."""


class RequestTimeoutError(ProviderError):
    """Request timed out on every attempt."""


class RateLimitExhausted(ProviderError):
    """Rate-limited on every attempt."""


class TransportError(ProviderError):
    """Connection failure or server error on every attempt."""


class MalformedResponse(ProviderError):
    """Endpoint answered 200 but the body had no usable completion."""


@dataclass(frozen=True)
class PromptSpec:
    target_level: int
    instruction: str


_INSTRUCTIONS = {
    5: "Paraphrase this document for a professional. It should be extremely "
       "difficult to read and best understood by university graduates.",
    20: "Paraphrase this document for college graduate level (US). It should be "
        "very difficult to read and best understood by university graduates.",
    40: "Paraphrase this document for college level (US). It should be difficult to read.",
    55: "Paraphrase this document for 10th-12th grade school level (US). It should "
        "be fairly difficult to read.",
    65: "Paraphrase this document for 8th/9th grade school level (US). It should be "
        "plain English and easily understood by 13- to 15-year-old students.",
    75: "Paraphrase this document for 7th grade school level (US). It should be "
        "fairly easy to read.",
    85: "Paraphrase this document for 6th grade school level (US). It should be "
        "easy to read and conversational English for consumers.",
    95: "Paraphrase this document for 5th grade school level (US). It should be "
        "very easy to read and easily understood by an average 11-year old student.",
}

PROMPT_CATALOG: tuple[PromptSpec, ...] = tuple(
    PromptSpec(level, _INSTRUCTIONS[level]) for level in TARGET_LEVELS
)


def build_prompt(
    target_level: int,
    document_text: str,
    overrides: dict[int, str] | None = None,
) -> dict:
    """Chat payload for one (level, document) pair.

    The payload keeps the raw document and level alongside the rendered
    messages so offline providers can work without parsing the prompt back
    out of the message text.
    """
    instructions = dict(_INSTRUCTIONS)
    if overrides:
        instructions.update(overrides)
    if target_level not in instructions:
        raise UnknownLevel(f"no prompt for target level {target_level!r}")
    instruction = instructions[target_level]
    return {
        "target_level": target_level,
        "document": document_text,
        "messages": [{"role": "user", "content": f"{instruction}\n\n{document_text}"}],
    }


@dataclass
class ProviderConfig:
    kind: str = "mock"  # "chat-http" | "mock"
    endpoint: str | None = None
    model_name: str = "mock"
    api_key_env: str | None = None
    temperature: float = 1.0
    max_retries: int = 3
    retry_initial_delay: float = 0.5
    retry_multiplier: float = 2.0
    request_timeout: float = 60.0
    seed: int = 0
    max_in_flight: int = 4
    requests_per_second: float | None = None

    def validate(self) -> None:
        if self.kind not in ("chat-http", "mock"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "chat-http":
            if not self.endpoint:
                raise ValueError("chat-http provider requires an endpoint")
            if not self.model_name:
                raise ValueError("chat-http provider requires a model name")


@dataclass(frozen=True)
class GenerationRecord:
    """One generation step: what went in, what was kept, and why."""

    source_id: str
    target_level: int
    step: int
    input_text: str
    output_text: str
    fallback: bool
    fallback_reason: str | None = None
    provider_meta: dict = field(default_factory=dict)


# --- garbage detection -------------------------------------------------------

_WORD_VOWELS = set("aeiouy")


@dataclass(frozen=True)
class GarbageThresholds:
    """Tunable limits for the incoherent-output heuristics."""

    vowelless_ratio: float = 0.2
    vowelless_min_len: int = 4
    max_consecutive_repeats: int = 5
    nonalpha_ratio: float = 0.4
    min_tokens: int = 3
    source_min_tokens: int = 30


DEFAULT_GARBAGE_THRESHOLDS = GarbageThresholds()


def detect_garbage(
    text: str,
    source_text: str,
    thresholds: GarbageThresholds = DEFAULT_GARBAGE_THRESHOLDS,
) -> bool:
    """True when the output is too incoherent to keep.

    Any of these trips the detector: a high share of vowel-free tokens
    (digit-bearing tokens exempt), a long run of one repeated token, a
    high non-alphabetic character ratio over the whole text, or an output
    collapsing to almost nothing while the source was a real passage.
    Empty output is always garbage.
    """
    tokens = tokenize(text)
    if not tokens:
        return True
    vowelless = sum(
        1
        for t in tokens
        if len(t) >= thresholds.vowelless_min_len
        and not any(ch in _WORD_VOWELS for ch in t.lower())
        and not any(ch.isdigit() for ch in t)
    )
    if vowelless / len(tokens) > thresholds.vowelless_ratio:
        return True
    run = 1
    folded = [t.casefold() for t in tokens]
    for prev, cur in zip(folded, folded[1:]):
        run = run + 1 if cur == prev else 1
        if run >= thresholds.max_consecutive_repeats:
            return True
    nonalpha = sum(1 for ch in text if not ch.isalpha())
    if nonalpha / len(text) > thresholds.nonalpha_ratio:
        return True
    if len(tokens) < thresholds.min_tokens:
        source_tokens = tokenize(source_text)
        if len(source_tokens) >= thresholds.source_min_tokens:
            return True
    return False


# --- synonym table and offline rewriter ----------------------------------------


@dataclass(frozen=True)
class SynonymMaps:
    to_shorter: dict[str, str]
    to_longer: dict[str, str]


def load_synonym_lexicon(path: str | Path | None = None) -> SynonymMaps:
    """Load ``word<TAB>replacement`` pairs and orient them by syllable count.

    Pairs whose sides count the same number of syllables are dropped; on
    duplicate keys the first line wins, so the shipped table is stable.
    """
    if path is None:
        text = resources.files("readlevel").joinpath("data/synonyms_en.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    to_shorter: dict[str, str] = {}
    to_longer: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            a, b = line.split("\t")
        except ValueError as exc:
            raise ValueError(f"synonym lexicon line {lineno}: expected 'word<TAB>replacement'") from exc
        a, b = a.strip().lower(), b.strip().lower()
        sa, sb = count_syllables(a), count_syllables(b)
        if sa == sb:
            continue
        short, long_ = (a, b) if sa < sb else (b, a)
        to_longer.setdefault(short, long_)
        to_shorter.setdefault(long_, short)
    return SynonymMaps(to_shorter=to_shorter, to_longer=to_longer)


_DEFAULT_SYNONYMS: SynonymMaps | None = None
_SYNONYMS_LOCK = threading.Lock()


def default_synonyms() -> SynonymMaps:
    global _DEFAULT_SYNONYMS
    with _SYNONYMS_LOCK:
        if _DEFAULT_SYNONYMS is None:
            _DEFAULT_SYNONYMS = load_synonym_lexicon()
        return _DEFAULT_SYNONYMS


_SPLIT_CONJ_RE = re.compile(r",\s+(?:and|but|or|so|yet)\s+")
_SPLIT_COMMA_RE = re.compile(r",\s+")
_SPLIT_BARE_CONJ_RE = re.compile(r"\s+(?:and|but|or|so|yet)\s+")


def _capitalized(s: str) -> str:
    return s[0].upper() + s[1:] if s else s


def _split_candidate(sentences: list[str]) -> list[str] | None:
    order = sorted(range(len(sentences)), key=lambda i: -len(tokenize(sentences[i])))
    for idx in order:
        s = sentences[idx]
        matches = (
            list(_SPLIT_CONJ_RE.finditer(s))
            or list(_SPLIT_COMMA_RE.finditer(s))
            or list(_SPLIT_BARE_CONJ_RE.finditer(s))
        )
        if not matches:
            continue
        mid = len(s) / 2
        m = min(matches, key=lambda m: abs(m.start() - mid))
        left = s[: m.start()].rstrip(",; ")
        right = s[m.end():].lstrip()
        if not tokenize(left) or not tokenize(right):
            continue
        if not left.endswith((".", "!", "?")):
            left += "."
        return sentences[:idx] + [left, _capitalized(right)] + sentences[idx + 1:]
    return None


def _merge_candidate(sentences: list[str]) -> list[str] | None:
    if len(sentences) < 2:
        return None
    sizes = [len(tokenize(s)) for s in sentences]
    idx = min(range(len(sentences) - 1), key=lambda i: sizes[i] + sizes[i + 1])
    left = sentences[idx].rstrip(".!? ")
    right = sentences[idx + 1]
    merged = f"{left}, and {right[0].lower()}{right[1:]}"
    return sentences[:idx] + [merged] + sentences[idx + 2:]


@lru_cache(maxsize=4096)
def _bare_syllables(word: str) -> int:
    return count_syllables(word)


def _swap_candidates(
    sentences: list[str], mapping: dict[str, str], rng: random.Random, limit: int = 3
) -> list[list[str]]:
    text = " ".join(sentences)
    present = sorted({t.lower() for t in tokenize(text)} & mapping.keys())
    if not present:
        return []
    present.sort(key=lambda w: (-abs(_bare_syllables(mapping[w]) - _bare_syllables(w)), w))
    picks = {0, len(present) // 2, len(present) - 1}
    chosen = [present[i] for i in sorted(picks)]
    rng.shuffle(chosen)
    out = []
    for word in chosen[:limit]:
        pattern = re.compile(rf"\b{re.escape(word)}\b", re.IGNORECASE)
        replacement = mapping[word]

        def _repl(m: re.Match, replacement=replacement) -> str:
            return _capitalized(replacement) if m.group(0)[0].isupper() else replacement

        out.append([pattern.sub(_repl, s) for s in sentences])
    return out


class _CountCache:
    """Per-sentence (words, syllables) memo keyed on the sentence string.

    The rewriter's edits never introduce a sentence boundary inside one
    sentence string, so the passage score is exactly the score of the
    joined text while only touched sentences need recounting.
    """

    def __init__(self, lexicon: dict[str, int] | None):
        self.lexicon = lexicon
        self.memo: dict[str, tuple[int, int]] = {}

    def counts(self, sentence: str) -> tuple[int, int]:
        got = self.memo.get(sentence)
        if got is None:
            tokens = tokenize(sentence)
            got = (len(tokens), sum(count_syllables(t, self.lexicon) for t in tokens))
            self.memo[sentence] = got
        return got

    def fres(self, sentences: list[str]) -> float:
        n_words = n_syllables = 0
        for s in sentences:
            w, sy = self.counts(s)
            n_words += w
            n_syllables += sy
        return reading_ease(n_words, len(sentences), n_syllables)


def mock_rewrite(
    source_text: str,
    target_level: int,
    seed: int = 0,
    *,
    synonyms: SynonymMaps | None = None,
    tolerance: float = 4.0,
    max_iterations: int = 50,
    lexicon: dict[str, int] | None = None,
) -> str:
    """Deterministically steer the text's reading ease toward the target.

    Each iteration proposes a few candidate edits (sentence split or merge
    plus word swaps in the helpful direction), measures each candidate, and
    keeps the one that most reduces the gap to the target.  Edits that do
    not improve the gap are never accepted, so the gap is monotone
    non-increasing.  Stops within ``tolerance`` of the target, after
    ``max_iterations``, or when no edit helps; best effort on pathological
    input.
    """
    try:
        analyze(source_text, lexicon)
    except EmptyText:
        return source_text
    sentences = sentence_strings(source_text)
    if not sentences:
        return source_text
    maps = synonyms if synonyms is not None else default_synonyms()
    rng = random.Random(seed)
    target = float(target_level)
    cache = _CountCache(lexicon)
    current_fres = cache.fres(sentences)
    err = abs(current_fres - target)

    for _ in range(max_iterations):
        if err <= tolerance:
            break
        if current_fres < target:
            structural = _split_candidate(sentences)
            swaps = _swap_candidates(sentences, maps.to_shorter, rng)
        else:
            structural = _merge_candidate(sentences)
            swaps = _swap_candidates(sentences, maps.to_longer, rng)
        candidates = ([structural] if structural else []) + swaps
        best = None
        for cand in candidates:
            f = cache.fres(cand)
            e = abs(f - target)
            if e < err and (best is None or e < best[0]):
                best = (e, f, cand)
        if best is None:
            break
        err, current_fres, sentences = best
    return " ".join(sentences)


# --- provider transports ----------------------------------------------------------


class _TokenBucket:
    """Blocking token bucket shared across threads."""

    def __init__(self, rate: float, capacity: float | None = None):
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self.tokens = self.capacity
        self.stamp = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.stamp) * self.rate)
                self.stamp = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


class MockProvider:
    """Offline deterministic provider; never touches the network."""

    def __init__(self, config: ProviderConfig, synonyms: SynonymMaps | None = None):
        self.config = config
        self.synonyms = synonyms

    def preflight(self) -> None:
        pass

    def generate(self, payload: dict) -> tuple[str, dict]:
        text = mock_rewrite(
            payload["document"],
            payload["target_level"],
            self.config.seed,
            synonyms=self.synonyms,
        )
        return text, {"model": "mock"}


class ChatHttpProvider:
    """Generic chat-completions client with retries and rate limiting."""

    def __init__(self, config: ProviderConfig):
        config.validate()
        self.config = config
        self._inflight = threading.Semaphore(max(1, config.max_in_flight))
        self._bucket = (
            _TokenBucket(config.requests_per_second)
            if config.requests_per_second
            else None
        )

    def preflight(self) -> None:
        self._api_key()

    def _api_key(self) -> str:
        env = self.config.api_key_env
        if not env or env not in os.environ:
            raise AuthError(f"credential environment variable {env!r} is not set")
        return os.environ[env]

    def generate(self, payload: dict) -> tuple[str, dict]:
        key = self._api_key()  # fail before any network traffic
        body = {
            "model": self.config.model_name,
            "messages": payload["messages"],
            "temperature": self.config.temperature,
        }
        headers = {"Authorization": f"Bearer {key}"}
        delay = self.config.retry_initial_delay
        last_error: ProviderError | None = None
        started = time.monotonic()
        for attempt in range(self.config.max_retries + 1):
            if self._bucket is not None:
                self._bucket.acquire()
            with self._inflight:
                try:
                    resp = requests.post(
                        self.config.endpoint,
                        json=body,
                        headers=headers,
                        timeout=self.config.request_timeout,
                    )
                except requests.Timeout as exc:
                    last_error = RequestTimeoutError(f"request timed out: {exc}")
                except requests.RequestException as exc:
                    last_error = TransportError(f"request failed: {exc}")
                else:
                    if resp.status_code in (401, 403):
                        raise AuthError(f"endpoint rejected credential ({resp.status_code})")
                    if resp.status_code == 429:
                        last_error = RateLimitExhausted("rate limited (429)")
                    elif resp.status_code >= 500:
                        last_error = TransportError(f"server error ({resp.status_code})")
                    elif resp.status_code != 200:
                        raise TransportError(f"unexpected status {resp.status_code}")
                    else:
                        text, usage = self._parse(resp)
                        meta = {
                            "model": self.config.model_name,
                            "latency_ms": round((time.monotonic() - started) * 1000, 3),
                            "retries": attempt,
                        }
                        if usage:
                            meta["usage"] = usage
                        return text, meta
            if attempt < self.config.max_retries:
                time.sleep(delay)
                delay *= self.config.retry_multiplier
        assert last_error is not None
        raise last_error

    @staticmethod
    def _parse(resp: requests.Response) -> tuple[str, dict | None]:
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"cannot extract completion: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedResponse("completion content is not text")
        usage = data.get("usage") if isinstance(data, dict) else None
        return text, usage if isinstance(usage, dict) else None


def make_provider(config: ProviderConfig):
    config.validate()
    if config.kind == "mock":
        return MockProvider(config)
    return ChatHttpProvider(config)


def generate(config: ProviderConfig, payload: dict) -> str:
    """One-shot generation; prefer a provider instance for batched runs."""
    text, _ = make_provider(config).generate(payload)
    return text
