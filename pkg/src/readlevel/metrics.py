"""Control-quality and paraphrase-quality scoring.

Three families of measurements live here:

* individual-scale control over the eight generations of one source
  (rank correlation, root mean square error against the targets,
  interval classification accuracy),
* population-scale decorrelation of generated vs source scores per
  target class (Pearson correlation and a least-squares line y = a*x + b),
* paraphrase quality per (source, generated) pair (self word error rate
  with the source as reference, embedding-based precision/recall/F1,
  percent length change).

Values are kept in natural units (correlations in [-1, 1], accuracy in
[0, 1]); any x100 display scaling happens at export time only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import textcore
from .textcore import TARGET_LEVELS, TextAnalysis


class DegenerateInput(ValueError):
    """Correlation/fit input with n < 2 or a constant side; no defined result."""


class EmptyReference(ValueError):
    """WER reference has no tokens."""


class EmptySide(ValueError):
    """An embedding list is empty."""


class DimensionMismatch(ValueError):
    """Embedding vectors do not share one dimension."""


@dataclass(frozen=True)
class ExampleScore:
    """Individual-scale results for one source across the eight targets."""

    source_id: str
    generated_fres: dict[int, float]
    spearman_rho: float
    rmse: float
    accuracy: float


@dataclass(frozen=True)
class PopulationFit:
    """Per-target-class fit of generated score against source score."""

    target_level: int
    pcc: float
    slope_a: float
    intercept_b: float
    r_squared: float
    n: int


@dataclass(frozen=True)
class PairMetrics:
    """Paraphrase-quality scores for one (source, generated) pair."""

    self_wer: float
    sem_precision: float | None
    sem_recall: float | None
    sem_f1: float | None
    length_change_pct: float


def _check_levels(values: Mapping[int, float], targets: Sequence[int]) -> list[float]:
    if set(values) != set(targets):
        missing = sorted(set(targets) - set(values))
        extra = sorted(set(values) - set(targets))
        raise ValueError(f"need one value per target; missing={missing} extra={extra}")
    return [float(values[t]) for t in targets]


def _average_ranks(xs: Sequence[float]) -> list[float]:
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(generated: Mapping[int, float], targets: Sequence[int] = TARGET_LEVELS) -> float:
    """Tie-corrected rank correlation of generated scores against targets.

    Returns 0.0 by convention when the generated side is constant (the
    correlation is mathematically undefined there, and the constant case
    is exactly the copy baseline).
    """
    ys = _check_levels(generated, targets)
    if len(set(ys)) == 1:
        return 0.0
    return pearson(_average_ranks([float(t) for t in targets]), _average_ranks(ys))


def rmse(generated: Mapping[int, float], targets: Sequence[int] = TARGET_LEVELS) -> float:
    """Root mean square error of generated scores against their targets."""
    ys = _check_levels(generated, targets)
    return math.sqrt(math.fsum((y - t) ** 2 for y, t in zip(ys, targets)) / len(targets))


def accuracy(generated: Mapping[int, float], targets: Sequence[int] = TARGET_LEVELS) -> float:
    """Fraction of generations whose score lands in its target's interval.

    Out-of-range scores classify to no interval and count as incorrect.
    """
    ys = _check_levels(generated, targets)
    hits = 0
    for y, t in zip(ys, targets):
        cls = textcore.classify(y)
        if cls is not None and cls.label == t:
            hits += 1
    return hits / len(targets)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation; raises DegenerateInput when undefined."""
    n = len(xs)
    if n != len(ys):
        raise ValueError("length mismatch")
    if n < 2:
        raise DegenerateInput("need at least 2 points")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("constant input has no defined correlation")
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


def ols_fit(xs: Sequence[float], ys: Sequence[float], target_level: int = 0) -> PopulationFit:
    """Least-squares line ys = a*xs + b with its correlation and r^2."""
    r = pearson(xs, ys)  # shares the degenerate-input policy
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    ss_res = math.fsum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    ss_tot = math.fsum((y - my) ** 2 for y in ys)
    return PopulationFit(
        target_level=target_level,
        pcc=r,
        slope_a=slope,
        intercept_b=intercept,
        r_squared=1.0 - ss_res / ss_tot,
        n=n,
    )


def wer_tokens(text: str) -> list[str]:
    """Normalized tokens for WER: the shared tokenizer plus case folding."""
    return [t.casefold() for t in textcore.tokenize(text)]


def self_wer(source_tokens: Sequence[str], generated_tokens: Sequence[str]) -> float:
    """(substitutions + deletions + insertions) / len(source); may exceed 1."""
    if not source_tokens:
        raise EmptyReference("source has no tokens")
    prev = list(range(len(generated_tokens) + 1))
    for i, ref in enumerate(source_tokens, 1):
        cur = [i] + [0] * len(generated_tokens)
        for j, hyp in enumerate(generated_tokens, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ref != hyp))
        prev = cur
    return prev[-1] / len(source_tokens)


def semantic_score(
    source_embeddings: np.ndarray | Sequence[Sequence[float]],
    generated_embeddings: np.ndarray | Sequence[Sequence[float]],
) -> tuple[float, float, float]:
    """Greedy max-cosine matching precision/recall/F1 over token embeddings.

    Precision averages, over generated tokens, the best cosine similarity
    to any source token; recall mirrors it from the source side.  No IDF
    weighting and no baseline rescaling are applied.  Zero vectors match
    nothing (similarity 0).
    """
    src = np.asarray(source_embeddings, dtype=float)
    gen = np.asarray(generated_embeddings, dtype=float)
    if src.size == 0 or gen.size == 0:
        raise EmptySide("both sides need at least one embedding")
    if src.ndim != 2 or gen.ndim != 2 or src.shape[1] != gen.shape[1]:
        raise DimensionMismatch(f"incompatible shapes {src.shape} and {gen.shape}")

    def _unit(rows: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        return np.divide(rows, norms, out=np.zeros_like(rows), where=norms > 0)

    sim = _unit(gen) @ _unit(src).T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def length_change(source: TextAnalysis, generated: TextAnalysis) -> float:
    """Percent change in word count from source to generated text."""
    return 100.0 * (generated.n_words - source.n_words) / source.n_words


def score_example(
    source: TextAnalysis,
    outputs: Mapping[int, str],
    source_id: str = "",
    lexicon: dict[str, int] | None = None,
    targets: Sequence[int] = TARGET_LEVELS,
) -> ExampleScore:
    """Individual-scale score for one source given its final output texts.

    An output with no word tokens is scored as the source itself, matching
    the pipeline's fallback-to-source policy; it is never dropped.
    """
    _check_levels(dict.fromkeys(outputs, 0.0), targets)
    generated_fres: dict[int, float] = {}
    for level in targets:
        try:
            generated_fres[level] = textcore.analyze(outputs[level], lexicon).fres
        except textcore.EmptyText:
            generated_fres[level] = source.fres
    return ExampleScore(
        source_id=source_id,
        generated_fres=generated_fres,
        spearman_rho=spearman(generated_fres, targets),
        rmse=rmse(generated_fres, targets),
        accuracy=accuracy(generated_fres, targets),
    )
