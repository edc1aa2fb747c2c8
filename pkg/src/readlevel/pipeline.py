"""Run orchestration: fan sources out to the eight targets and persist records.

A run lives in one directory: a ``manifest.json`` snapshot (run id, corpus
hash, provider config, mode, targets) next to an append-only
``records.jsonl`` store with one generation record per line.  Records key
on (source_id, target_level, step); a resumed run verifies the corpus
hash, repairs a torn final line if the previous process died mid-write,
and skips keys already present, so an interrupted run converges to the
same store as an uninterrupted one.

Modes: ``copy`` writes the source text for every target (the lower-bound
baseline); ``one-step`` asks the provider once per (source, target);
``two-step`` re-prompts with the identical instruction on the step-1
output, keeping the step-2 text as final.  Garbage or provider failure
falls back to the best earlier text (source at step 1, step-1 output at
step 2), flagged and with a recorded reason.
"""

from __future__ import annotations

import datetime as _dt
import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import metrics, report, textcore
from .dataset import Corpus
from .providers import (
    AuthError,
    DEFAULT_GARBAGE_THRESHOLDS,
    GarbageThresholds,
    GenerationRecord,
    ProviderConfig,
    ProviderError,
    build_prompt,
    detect_garbage,
    make_provider,
)
from .textcore import TARGET_LEVELS

MODES = ("copy", "one-step", "two-step")


class PipelineError(RuntimeError):
    pass


class CorpusHashMismatch(PipelineError):
    """Resume attempted against a corpus whose content hash changed."""


class ResumeMismatch(PipelineError):
    """Resume attempted with a different mode or target list."""


class StorageError(PipelineError):
    pass


class AbortedByAuthError(PipelineError):
    """Provider rejected the credential; the run stopped rather than fall back."""


class IncompleteRun(PipelineError):
    """Scoring requested but final records are missing."""

    def __init__(self, missing: list[tuple[str, int]]):
        self.missing = missing
        shown = ", ".join(f"({s}, {t})" for s, t in missing[:8])
        more = "" if len(missing) <= 8 else f" and {len(missing) - 8} more"
        super().__init__(f"missing final records for {shown}{more}")


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    corpus_path: str | None
    corpus_sha256: str
    provider: ProviderConfig
    mode: str
    targets: tuple[int, ...]
    created_at: str

    @property
    def final_step(self) -> int:
        return 2 if self.mode == "two-step" else 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["targets"] = list(self.targets)
        return d

    @staticmethod
    def from_dict(d: Mapping) -> "RunManifest":
        return RunManifest(
            run_id=d["run_id"],
            corpus_path=d.get("corpus_path"),
            corpus_sha256=d["corpus_sha256"],
            provider=ProviderConfig(**d["provider"]),
            mode=d["mode"],
            targets=tuple(d["targets"]),
            created_at=d["created_at"],
        )


def make_manifest(
    corpus: Corpus,
    provider: ProviderConfig,
    mode: str,
    targets: Iterable[int] = TARGET_LEVELS,
    run_id: str | None = None,
) -> RunManifest:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if run_id is None:
        stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%d-%H%M%S")
        run_id = f"run-{stamp}-{uuid.uuid4().hex[:6]}"
    return RunManifest(
        run_id=run_id,
        corpus_path=corpus.path,
        corpus_sha256=corpus.content_sha256,
        provider=provider,
        mode=mode,
        targets=tuple(targets),
        created_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
    )


# --- record store ------------------------------------------------------------


def _record_to_dict(rec: GenerationRecord) -> dict:
    return {
        "source_id": rec.source_id,
        "target_level": rec.target_level,
        "step": rec.step,
        "input_text": rec.input_text,
        "output_text": rec.output_text,
        "fallback": rec.fallback,
        "fallback_reason": rec.fallback_reason,
        "provider_meta": rec.provider_meta,
    }


def _record_from_dict(d: Mapping) -> GenerationRecord:
    return GenerationRecord(
        source_id=d["source_id"],
        target_level=d["target_level"],
        step=d["step"],
        input_text=d["input_text"],
        output_text=d["output_text"],
        fallback=d["fallback"],
        fallback_reason=d.get("fallback_reason"),
        provider_meta=dict(d.get("provider_meta") or {}),
    )


class RecordStore:
    """Append-only JSONL store of generation records, safe to resume.

    Record lines deliberately carry no run id or timestamp: stores from
    identical runs are byte-comparable after sorting by key.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def repair(self) -> None:
        """Drop a torn, unterminated final line left by a killed process."""
        if not self.path.exists():
            return
        raw = self.path.read_bytes()
        if not raw:
            return
        body, sep, tail = raw.rpartition(b"\n")
        if tail:
            with open(self.path, "r+b") as fh:
                fh.truncate(len(body) + len(sep))

    def append(self, rec: GenerationRecord) -> None:
        line = json.dumps(_record_to_dict(rec), sort_keys=True, ensure_ascii=False)
        with self._lock:
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
            except OSError as exc:
                raise StorageError(f"cannot append to {self.path}: {exc}") from exc

    def load(self) -> list[GenerationRecord]:
        if not self.path.exists():
            return []
        records = []
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    records.append(_record_from_dict(json.loads(line)))
                except (ValueError, KeyError) as exc:
                    raise StorageError(f"{self.path}:{lineno}: bad record: {exc}") from exc
        return records

    def existing_outputs(self) -> dict[tuple[str, int, int], str]:
        """Map (source_id, target, step) -> output text; rejects duplicates."""
        outputs: dict[tuple[str, int, int], str] = {}
        for rec in self.load():
            key = (rec.source_id, rec.target_level, rec.step)
            if key in outputs:
                raise StorageError(f"duplicate record key {key}")
            outputs[key] = rec.output_text
        return outputs


# --- the run itself -----------------------------------------------------------


@dataclass
class RunResult:
    run_dir: Path
    written: int
    skipped: int
    fallbacks: int


def _load_or_write_manifest(run_dir: Path, manifest: RunManifest) -> RunManifest:
    path = run_dir / "manifest.json"
    if path.exists():
        try:
            on_disk = RunManifest.from_dict(json.loads(path.read_text("utf-8")))
        except (ValueError, KeyError) as exc:
            raise StorageError(f"unreadable manifest at {path}: {exc}") from exc
        if on_disk.corpus_sha256 != manifest.corpus_sha256:
            raise CorpusHashMismatch(
                f"corpus hash {manifest.corpus_sha256[:12]} does not match "
                f"the one recorded at run start ({on_disk.corpus_sha256[:12]})"
            )
        if on_disk.mode != manifest.mode or on_disk.targets != manifest.targets:
            raise ResumeMismatch("mode/targets differ from the original run")
        return on_disk
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")
    return manifest


def load_manifest(run_dir: str | Path) -> RunManifest:
    path = Path(run_dir) / "manifest.json"
    return RunManifest.from_dict(json.loads(path.read_text("utf-8")))


def _generate_one(
    provider,
    level: int,
    document: str,
    fallback_text: str,
    thresholds: GarbageThresholds,
    prompt_overrides: dict[int, str] | None,
) -> tuple[str, bool, str | None, dict]:
    """One provider call with the garbage/failure fallback applied."""
    payload = build_prompt(level, document, prompt_overrides)
    try:
        text, meta = provider.generate(payload)
    except AuthError:
        raise
    except ProviderError as exc:
        return fallback_text, True, f"provider-error: {type(exc).__name__}: {exc}", {}
    if detect_garbage(text, document, thresholds):
        return fallback_text, True, "garbage-detected", meta
    return text, False, None, meta


def run(
    manifest: RunManifest,
    corpus: Corpus,
    out_root: str | Path,
    *,
    provider=None,
    workers: int = 1,
    garbage_thresholds: GarbageThresholds = DEFAULT_GARBAGE_THRESHOLDS,
    prompt_overrides: dict[int, str] | None = None,
    progress: Callable[[str], None] | None = None,
) -> RunResult:
    """Execute (or resume) a run; exactly one final record per (source, target).

    Raises AbortedByAuthError on credential failure instead of falling
    back, since every subsequent call would fail the same way.  All other
    provider errors degrade to fallback records.
    """
    if manifest.corpus_sha256 != corpus.content_sha256:
        raise CorpusHashMismatch("supplied corpus does not match the manifest hash")
    if provider is None:
        provider = make_provider(manifest.provider)
    try:
        provider.preflight()
    except AuthError as exc:
        raise AbortedByAuthError(str(exc)) from exc

    run_dir = Path(out_root) / manifest.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = _load_or_write_manifest(run_dir, manifest)
    store = RecordStore(run_dir / "records.jsonl")
    store.repair()
    existing = store.existing_outputs()

    written = skipped = fallbacks = 0
    counter_lock = threading.Lock()

    def handle_source(entry) -> None:
        nonlocal written, skipped, fallbacks
        for level in manifest.targets:
            key1 = (entry.source_id, level, 1)
            if manifest.mode == "copy":
                if key1 in existing:
                    with counter_lock:
                        skipped += 1
                    continue
                store.append(GenerationRecord(
                    source_id=entry.source_id, target_level=level, step=1,
                    input_text=entry.text, output_text=entry.text,
                    fallback=False, provider_meta={"model": "copy"},
                ))
                with counter_lock:
                    written += 1
                continue

            if key1 in existing:
                step1_output = existing[key1]
                with counter_lock:
                    skipped += 1
            else:
                text, fb, reason, meta = _generate_one(
                    provider, level, entry.text, entry.text,
                    garbage_thresholds, prompt_overrides,
                )
                store.append(GenerationRecord(
                    source_id=entry.source_id, target_level=level, step=1,
                    input_text=entry.text, output_text=text,
                    fallback=fb, fallback_reason=reason, provider_meta=meta,
                ))
                step1_output = text
                with counter_lock:
                    written += 1
                    fallbacks += fb

            if manifest.mode == "two-step":
                key2 = (entry.source_id, level, 2)
                if key2 in existing:
                    with counter_lock:
                        skipped += 1
                    continue
                # Step 2 re-prompts identically with the step-1 output as the
                # document; garbage here falls back to the step-1 text.
                text, fb, reason, meta = _generate_one(
                    provider, level, step1_output, step1_output,
                    garbage_thresholds, prompt_overrides,
                )
                store.append(GenerationRecord(
                    source_id=entry.source_id, target_level=level, step=2,
                    input_text=step1_output, output_text=text,
                    fallback=fb, fallback_reason=reason, provider_meta=meta,
                ))
                with counter_lock:
                    written += 1
                    fallbacks += fb
        if progress is not None:
            progress(entry.source_id)

    try:
        if workers <= 1:
            for entry in corpus.entries:
                handle_source(entry)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for future in [pool.submit(handle_source, e) for e in corpus.entries]:
                    future.result()
    except AuthError as exc:
        raise AbortedByAuthError(str(exc)) from exc
    return RunResult(run_dir=run_dir, written=written, skipped=skipped, fallbacks=fallbacks)


# --- scoring -------------------------------------------------------------------


def _canonical_json_lines(rows: Iterable[Mapping]) -> str:
    return "".join(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n" for row in rows)


@dataclass
class ScoreResult:
    scores_dir: Path
    n_examples: int
    n_pairs: int


def score_run(
    run_dir: str | Path,
    *,
    embedder=None,
    lexicon: dict[str, int] | None = None,
) -> ScoreResult:
    """Score a completed run: per-example, per-pair and per-target files.

    Requires every (source, target) final record to exist; raises
    IncompleteRun naming the gaps otherwise.  Scoring is deterministic,
    so re-scoring an unchanged store rewrites identical files.
    """
    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    records = RecordStore(run_dir / "records.jsonl").load()

    sources: dict[str, str] = {}
    finals: dict[tuple[str, int], GenerationRecord] = {}
    for rec in records:
        if rec.step == 1 and rec.source_id not in sources:
            sources[rec.source_id] = rec.input_text
        if rec.step == manifest.final_step:
            finals[(rec.source_id, rec.target_level)] = rec

    missing = sorted(
        (sid, t) for sid in sources for t in manifest.targets if (sid, t) not in finals
    )
    if missing:
        raise IncompleteRun(missing)

    example_rows: list[dict] = []
    pair_rows: list[dict] = []
    for sid in sorted(sources):
        source_analysis = textcore.analyze(sources[sid], lexicon)
        source_embedding = embedder.embed(sources[sid]) if embedder is not None else None
        generated_fres: dict[int, float] = {}
        for level in manifest.targets:
            rec = finals[(sid, level)]
            try:
                gen_analysis = textcore.analyze(rec.output_text, lexicon)
            except textcore.EmptyText:
                gen_analysis = source_analysis  # fallback-to-source policy
            generated_fres[level] = gen_analysis.fres
            sem_p = sem_r = sem_f1 = None
            if source_embedding is not None:
                gen_embedding = embedder.embed(rec.output_text)
                if len(gen_embedding.tokens) == 0:
                    gen_embedding = source_embedding
                sem_p, sem_r, sem_f1 = metrics.semantic_score(
                    source_embedding.vectors, gen_embedding.vectors
                )
            pair_rows.append({
                "source_id": sid,
                "target_level": level,
                "source_fres": source_analysis.fres,
                "generated_fres": gen_analysis.fres,
                "self_wer": metrics.self_wer(
                    metrics.wer_tokens(sources[sid]), metrics.wer_tokens(rec.output_text)
                ),
                "sem_precision": sem_p,
                "sem_recall": sem_r,
                "sem_f1": sem_f1,
                "length_change_pct": metrics.length_change(source_analysis, gen_analysis),
                "n_words_source": source_analysis.n_words,
                "n_words_generated": gen_analysis.n_words,
                "fallback": rec.fallback,
            })
        example_rows.append({
            "source_id": sid,
            "source_fres": source_analysis.fres,
            "generated_fres": {str(k): v for k, v in generated_fres.items()},
            "spearman_rho": metrics.spearman(generated_fres, manifest.targets),
            "rmse": metrics.rmse(generated_fres, manifest.targets),
            "accuracy": metrics.accuracy(generated_fres, manifest.targets),
        })

    population_rows = report.population_summary(pair_rows, targets=manifest.targets)

    scores_dir = run_dir / "scores"
    scores_dir.mkdir(exist_ok=True)
    try:
        (scores_dir / "individual.jsonl").write_text(_canonical_json_lines(example_rows), "utf-8")
        (scores_dir / "pairs.jsonl").write_text(_canonical_json_lines(pair_rows), "utf-8")
        (scores_dir / "population.jsonl").write_text(_canonical_json_lines(population_rows), "utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write scores: {exc}") from exc
    return ScoreResult(scores_dir=scores_dir, n_examples=len(example_rows), n_pairs=len(pair_rows))


def read_score_rows(run_dir: str | Path, name: str) -> list[dict]:
    """Read one of the score files back (``individual``, ``pairs``, ``population``)."""
    path = Path(run_dir) / "scores" / f"{name}.jsonl"
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows
